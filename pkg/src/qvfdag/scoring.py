"""Overdispersion scores and causal-ordering recovery.

For a candidate node ``k`` and a conditioning set ``C`` the score is the
weighted average, over conditioning cells ``x`` with enough samples, of

    omega(x)**2 * var(X_k | X_C = x) - omega(x) * mean(X_k | X_C = x),
    omega(x) = 1 / (beta0 + beta1 * mean(X_k | X_C = x)).

It vanishes in population when ``C`` contains every parent of ``k`` and
is positive otherwise, so nodes are ordered by repeatedly taking the
smallest score.

Cell moments are plug-in (divide by the cell count), which makes every
score a function of the empirical distribution only: duplicating the
rows of the data leaves it unchanged.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dag import Ordering, UndirectedGraph
from .errors import DegenerateOmega, NoCellsRetained
from .families import OMEGA_EPS, omega

__all__ = [
    "C0_DEFAULT",
    "ConditioningCell",
    "ScoreReport",
    "truncated_cells",
    "score_first",
    "score_at",
    "estimate_ordering",
]

C0_DEFAULT = 0.005


@dataclass(frozen=True)
class ConditioningCell:
    key: tuple
    count: int
    mean: float
    variance: float


@dataclass
class ScoreReport:
    node: int
    position: int
    candidate_parents: tuple
    score: float
    cells_used: int
    samples_used: int
    degenerate: bool
    degenerate_cells: int = 0

    def to_dict(self):
        out = asdict(self)
        out["candidate_parents"] = list(self.candidate_parents)
        out["score"] = self.score if np.isfinite(self.score) else None
        return out


def truncated_cells(data, target, cond=(), c0=C0_DEFAULT, min_count=2, ddof=0):
    """Group rows by their exact values on ``cond`` and keep the large cells.

    A cell is kept when it holds at least ``c0 * n`` rows and at least
    ``min_count`` rows (a variance needs two points).  Returns the kept
    cells and their total row count ``n_S``.
    """
    data = np.asarray(data, dtype=float)
    if not 0 < c0 < 1:
        raise ValueError(f"c0 must lie in (0, 1), got {c0}")
    n = data.shape[0]
    y = data[:, target]
    cond = sorted(int(c) for c in cond)
    if not cond:
        cells = []
        if n >= max(min_count, c0 * n):
            cells = [ConditioningCell((), n, float(np.mean(y)), float(np.var(y, ddof=ddof)))]
    else:
        keys, inv, counts = np.unique(
            data[:, cond], axis=0, return_inverse=True, return_counts=True
        )
        inv = inv.ravel()
        means = np.bincount(inv, weights=y) / counts
        dev = y - means[inv]
        keep = np.flatnonzero((counts >= c0 * n) & (counts >= min_count))
        variances = np.bincount(inv, weights=dev * dev) / np.maximum(counts - ddof, 1)
        cells = [
            ConditioningCell(
                tuple(keys[c].tolist()), int(counts[c]), float(means[c]), float(variances[c])
            )
            for c in keep
        ]
    if not cells:
        raise NoCellsRetained(
            f"no cell of node {target} given {cond} reaches {c0} * {n} rows"
        )
    return cells, sum(c.count for c in cells)


def score_at(data, j_pos, k, cand, fam, c0=C0_DEFAULT, eps=OMEGA_EPS, ddof=0) -> ScoreReport:
    """Conditional overdispersion score of node ``k`` given ``cand``.

    Cells whose omega is degenerate are dropped and the remaining weights
    renormalised.  If nothing survives the report is flagged degenerate
    with an infinite score.
    """
    cand = tuple(sorted(int(c) for c in cand))
    try:
        cells, _ = truncated_cells(data, k, cand, c0, ddof=ddof)
    except NoCellsRetained:
        return ScoreReport(k, j_pos, cand, np.inf, 0, 0, True)
    terms, counts = [], []
    bad = 0
    for cell in cells:
        try:
            w = omega(fam, cell.mean, eps)
        except DegenerateOmega:
            bad += 1
            continue
        terms.append(w * w * cell.variance - w * cell.mean)
        counts.append(cell.count)
    if not counts:
        return ScoreReport(k, j_pos, cand, np.inf, 0, 0, True, bad)
    n_s = sum(counts)
    if len(counts) == 1:
        score = terms[0]
    else:
        score = float(np.dot(np.asarray(counts) / n_s, terms))
    return ScoreReport(k, j_pos, cand, float(score), len(counts), n_s, False, bad)


def score_first(data, k, fam, eps=OMEGA_EPS, c0=C0_DEFAULT, ddof=0) -> ScoreReport:
    """Marginal overdispersion score of node ``k`` over all rows."""
    return score_at(data, 0, k, (), fam, c0, eps, ddof)


def _argmin(reports):
    return min(reports, key=lambda r: (r.degenerate, r.score, r.node)).node


def estimate_ordering(
    data,
    moral: UndirectedGraph,
    families,
    c0=C0_DEFAULT,
    fallback="widen",
    candidate_rule="previous",
    eps=OMEGA_EPS,
    ddof=0,
):
    """Greedy causal ordering by smallest overdispersion score.

    At each position the candidates are the unordered neighbours of the
    node placed last (``candidate_rule="previous"``) or of any ordered
    node (``"ordered"``); ``"all"`` considers every unordered node.  When
    the candidate set is empty, ``fallback="widen"`` uses every unordered
    node and ``"error"`` raises.  Candidate ``k`` is scored conditionally
    on its neighbours that are already ordered.

    Returns the ordering and, per position, the list of score reports.
    """
    data = np.asarray(data, dtype=float)
    p = data.shape[1]
    if moral.p != p:
        raise ValueError(f"moral graph has p={moral.p}, data has {p} columns")
    if candidate_rule not in ("previous", "ordered", "all"):
        raise ValueError(f"unknown candidate rule {candidate_rule!r}")
    if fallback not in ("widen", "error"):
        raise ValueError(f"unknown fallback policy {fallback!r}")
    fams = families if isinstance(families, (list, tuple)) else [families] * p
    if p == 0:
        return Ordering(()), []
    adj = moral.adjacency()

    first = [score_first(data, k, fams[k], eps, c0, ddof) for k in range(p)]
    order = [_argmin(first)]
    reports = [first]
    placed = {order[0]}
    for pos in range(1, p - 1):
        remaining = [k for k in range(p) if k not in placed]
        if candidate_rule == "previous":
            cands = sorted(adj[order[-1]] - placed)
        elif candidate_rule == "ordered":
            cands = sorted(set().union(*(adj[v] for v in order)) - placed)
        else:
            cands = remaining
        if not cands:
            if fallback == "error":
                raise ValueError(f"no candidates at position {pos}")
            cands = remaining
        scored = [
            score_at(data, pos, k, adj[k] & placed, fams[k], c0, eps, ddof) for k in cands
        ]
        nxt = _argmin(scored)
        order.append(nxt)
        placed.add(nxt)
        reports.append(scored)
    if p > 1:
        order.extend(k for k in range(p) if k not in placed)
    return Ordering(tuple(order)), reports
