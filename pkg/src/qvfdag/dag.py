"""Directed and undirected graph types, moralization and the random DAG generator.

Nodes are numbered ``0 .. p-1``; node ``j`` here is node ``j + 1`` in
1-based notation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from itertools import combinations

import numpy as np

__all__ = [
    "Dag",
    "UndirectedGraph",
    "Ordering",
    "parents",
    "moralize",
    "is_consistent_ordering",
    "random_dag",
    "max_degree",
]


def _check_node(j, p):
    if not 0 <= j < p:
        raise IndexError(f"node {j} out of range for p={p}")


@dataclass(frozen=True, eq=False)
class Dag:
    """A DAG over ``p`` nodes with its GLM parameter matrix.

    ``theta[j, j]`` is the intercept of node ``j`` and ``theta[j, k]`` is
    the weight of parent ``k`` in node ``j``'s natural parameter, nonzero
    exactly when ``(k, j)`` is an edge.
    """

    p: int
    edges: frozenset
    theta: np.ndarray
    node_family_ids: tuple = ()

    def __post_init__(self):
        edges = frozenset((int(a), int(b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        for a, b in edges:
            _check_node(a, self.p)
            _check_node(b, self.p)
            if a == b:
                raise ValueError(f"self-loop on node {a}")
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.p, self.p):
            raise ValueError(f"theta must be {self.p}x{self.p}, got {theta.shape}")
        off = theta.copy()
        np.fill_diagonal(off, 0.0)
        support = {(int(k), int(j)) for j, k in zip(*np.nonzero(off))}
        if support != edges:
            raise ValueError("theta's off-diagonal support does not match the edge set")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if not self.node_family_ids:
            object.__setattr__(self, "node_family_ids", ("",) * self.p)
        self.topological_order()

    @classmethod
    def from_edges(cls, p, edges, weight=1.0, intercept=0.0, node_family_ids=()):
        """Build a DAG with a constant edge weight (handy for structural work)."""
        theta = np.zeros((p, p))
        np.fill_diagonal(theta, intercept)
        for a, b in edges:
            theta[b, a] = weight
        return cls(p, frozenset(edges), theta, tuple(node_family_ids))

    def parents(self, j) -> set:
        _check_node(j, self.p)
        return {a for a, b in self.edges if b == j}

    def children(self, j) -> set:
        _check_node(j, self.p)
        return {b for a, b in self.edges if a == j}

    def topological_order(self) -> list:
        """Deterministic topological order (smallest ready node first)."""
        ts = TopologicalSorter({j: set() for j in range(self.p)})
        for a, b in self.edges:
            ts.add(b, a)
        try:
            ts.prepare()
        except CycleError as exc:
            raise ValueError(f"edge set has a directed cycle: {exc.args[1]}") from None
        order = []
        while ts.is_active():
            ready = sorted(ts.get_ready())
            order.extend(ready)
            ts.done(*ready)
        return order

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return (
            self.p == other.p
            and self.edges == other.edges
            and np.array_equal(self.theta, other.theta)
        )

    __hash__ = None


@dataclass(frozen=True)
class UndirectedGraph:
    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            a, b = tuple(e) if len(e) == 2 else (None, None)
            if a is None or a == b:
                raise ValueError(f"invalid undirected edge {e!r}")
            _check_node(a, self.p)
            _check_node(b, self.p)
            norm.add(frozenset((int(a), int(b))))
        object.__setattr__(self, "edges", frozenset(norm))

    def neighbors(self, j) -> set:
        _check_node(j, self.p)
        return {k for e in self.edges if j in e for k in e if k != j}

    def adjacency(self) -> list:
        adj = [set() for _ in range(self.p)]
        for e in self.edges:
            a, b = tuple(e)
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def sorted_edges(self) -> list:
        return sorted(tuple(sorted(e)) for e in self.edges)


@dataclass(frozen=True)
class Ordering:
    perm: tuple

    def __post_init__(self):
        perm = tuple(int(v) for v in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        object.__setattr__(self, "perm", perm)

    def __len__(self):
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)

    def position(self) -> dict:
        return {node: i for i, node in enumerate(self.perm)}


def parents(dag: Dag, j: int) -> set:
    return dag.parents(j)


def moralize(dag: Dag) -> UndirectedGraph:
    """Skeleton of ``dag`` plus an edge between every pair of co-parents."""
    edges = {frozenset(e) for e in dag.edges}
    for j in range(dag.p):
        for a, b in combinations(sorted(dag.parents(j)), 2):
            edges.add(frozenset((a, b)))
    return UndirectedGraph(dag.p, frozenset(edges))


def is_consistent_ordering(dag: Dag, ordering) -> bool:
    perm = ordering.perm if isinstance(ordering, Ordering) else tuple(ordering)
    if len(perm) != dag.p:
        raise ValueError(f"ordering has length {len(perm)}, DAG has p={dag.p}")
    pos = {node: i for i, node in enumerate(perm)}
    return all(pos[a] < pos[b] for a, b in dag.edges)


def random_dag(
    p: int,
    num_parents: int,
    theta_range=(-1.0, -0.5),
    intercept: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Dag:
    """Chain-backbone random DAG.

    The chain ``0 -> 1 -> ... -> p-1`` is always present, which pins the
    causal ordering to the identity.  Node ``j >= 2`` then receives extra
    parents drawn uniformly without replacement from ``0 .. j-2`` until it
    has ``min(j, num_parents)`` parents.  Edge weights are uniform on
    ``theta_range``.
    """
    if p < 2:
        raise ValueError(f"p must be at least 2, got {p}")
    if num_parents < 1:
        raise ValueError(f"num_parents must be at least 1, got {num_parents}")
    lo, hi = map(float, theta_range)
    if not lo < hi:
        raise ValueError(f"empty theta range [{lo}, {hi}]")
    if rng is None:
        rng = np.random.default_rng()
    theta = np.zeros((p, p))
    np.fill_diagonal(theta, intercept)
    edges = set()
    for j in range(1, p):
        extra = min(j, num_parents) - 1
        pa = [j - 1]
        if extra > 0:
            pa.extend(int(k) for k in rng.choice(j - 1, size=extra, replace=False))
        for k in sorted(pa):
            edges.add((k, j))
            theta[j, k] = rng.uniform(lo, hi)
    return Dag(p, frozenset(edges), theta)


def max_degree(g: UndirectedGraph) -> int:
    if g.p == 0:
        return 0
    return max((len(nb) for nb in g.adjacency()), default=0)
