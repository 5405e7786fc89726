"""Plain-text formats: count-matrix CSV, edge lists and ordering files.

Edge lists hold one edge per line, ``j k`` for a directed edge ``j -> k``
and ``j -- k`` for an undirected one.  Node ids are 0-based.  A leading
``# p <count>`` comment records the node count; other ``#`` lines are
ignored.
"""
from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

__all__ = [
    "ParseError",
    "write_count_matrix",
    "read_count_matrix",
    "write_edges",
    "read_edges",
    "write_ordering",
    "read_ordering",
]


class ParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = path, line


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def write_count_matrix(path, X) -> None:
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(X.shape[1])])
        for row in X:
            w.writerow([_fmt(v) for v in row])


def read_count_matrix(path) -> np.ndarray:
    """Parse a count-matrix CSV; errors name the offending line."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        p = len(header)
        if header != [f"x{j}" for j in range(p)]:
            raise ParseError(path, 1, f"header must be x0,...,x{p - 1}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != p:
                raise ParseError(path, lineno, f"row {lineno - 1} has {len(row)} fields, expected {p}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ParseError(path, lineno, f"row {lineno - 1} has a non-numeric field") from None
            if not all(np.isfinite(vals)):
                raise ParseError(path, lineno, f"row {lineno - 1} has a non-finite value")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(len(rows), p)


def write_edges(path, edges, p: int, undirected: bool = False) -> None:
    sep = " -- " if undirected else " "
    if undirected:
        pairs = sorted(tuple(sorted(e)) for e in edges)
    else:
        pairs = sorted(tuple(e) for e in edges)
    lines = [f"# p {p}"] + [f"{a}{sep}{b}" for a, b in pairs]
    Path(path).write_text("\n".join(lines) + "\n")


_DIRECTED = re.compile(r"^\s*(\d+)\s+(\d+)\s*$")
_UNDIRECTED = re.compile(r"^\s*(\d+)\s*--\s*(\d+)\s*$")
_HEADER = re.compile(r"^#\s*p\s+(\d+)\s*$")


def read_edges(path):
    """Return ``(edges, p, undirected)``; ``p`` is None without a header."""
    edges, p, kinds = [], None, set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            m = _HEADER.match(line.strip())
            if m and p is None:
                p = int(m.group(1))
            continue
        m = _UNDIRECTED.match(line)
        if m:
            kinds.add("u")
        else:
            m = _DIRECTED.match(line)
            if not m:
                raise ParseError(path, lineno, f"cannot parse edge {line!r}")
            kinds.add("d")
        edges.append((int(m.group(1)), int(m.group(2))))
    if len(kinds) > 1:
        raise ParseError(path, 0, "mixes directed and undirected edges")
    undirected = kinds == {"u"}
    if p is not None:
        for a, b in edges:
            if a >= p or b >= p:
                raise ParseError(path, 0, f"edge ({a}, {b}) exceeds p={p}")
    if undirected:
        edges = [frozenset(e) for e in edges]
    return edges, p, undirected


def write_ordering(path, perm) -> None:
    Path(path).write_text(" ".join(str(int(v)) for v in perm) + "\n")


def read_ordering(path) -> tuple:
    return tuple(int(v) for v in Path(path).read_text().split())
