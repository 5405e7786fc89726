"""End-to-end learning, evaluation metrics and the Monte-Carlo benchmark.

Seeding: trial ``t`` of a config with master seed ``s`` draws everything
(DAG, then data) from ``np.random.default_rng(SeedSequence(s, spawn_key=(t,)))``.
Trials never share state, so results do not depend on execution order and
configs that differ only in ``n`` share their DAGs trial by trial.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .dag import Dag, Ordering, UndirectedGraph, is_consistent_ordering, moralize, random_dag
from .families import QvfFamily, family_from_spec, family_to_spec, sample_dataset
from .glm import GlmOptions, estimate_moral_graph, parent_select
from .scoring import C0_DEFAULT, estimate_ordering

__all__ = [
    "OdsConfig",
    "OdsResult",
    "EvalMetrics",
    "default_lambda",
    "trial_rng",
    "ods_learn",
    "skeleton_hamming",
    "directed_hamming",
    "evaluate",
    "generate",
    "run_trial",
    "run_benchmark",
    "aggregate",
    "results_to_csv",
    "expand_grid",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = [
    "family",
    "p",
    "n",
    "num_parents",
    "trial",
    "ordering_consistent",
    "skeleton_hamming_norm",
    "directed_hamming_norm",
    "step1_ms",
    "step2_ms",
    "step3_ms",
    "degenerate_cells",
    "error",
]

# regularisation constants for lambda = const / log(max(n, p))
_LAMBDA_CONST = {"poisson": 0.75, "binomial": 0.10}


@dataclass(frozen=True)
class OdsConfig:
    """Experiment and learner settings.

    ``lam``/``lam_d`` are the Step 1 and Step 3 penalties; ``"auto"``
    applies the ``const / log(max(n, p))`` rule (Poisson and binomial
    only) and ``lam_d=None`` reuses ``lam``.  ``family`` is a family spec
    (see :func:`qvfdag.families.family_from_spec`) or a per-node list.
    """

    p: int | None = None
    n: int | None = None
    num_parents: int = 2
    family: object = "poisson"
    theta_range: tuple = (-1.0, -0.5)
    intercept: object = 0.0
    lam: object = "auto"
    lam_d: object = None
    c0: float = C0_DEFAULT
    ddof: int = 0
    rule: str = "or"
    trials: int = 50
    seed: int = 0
    oracle_moral_graph: bool = False
    oracle_ordering: bool = False
    last_node_rule: str = "prefix"
    step3_scope: str = "neighbors"
    candidate_rule: str = "previous"
    fallback: str = "widen"
    standardize: bool = True
    glm_tol: float = 1e-8
    glm_max_iter: int = 100

    def __post_init__(self):
        if not 0 < self.c0 < 1:
            raise ValueError(f"c0 must lie in (0, 1), got {self.c0}")
        for name in ("lam", "lam_d"):
            v = getattr(self, name)
            if v is not None and v != "auto" and not (isinstance(v, (int, float)) and v >= 0):
                raise ValueError(f"{name} must be 'auto' or a nonnegative number, got {v!r}")
        if self.intercept != "centered" and not isinstance(self.intercept, (int, float)):
            raise ValueError(f"intercept must be a number or 'centered', got {self.intercept!r}")
        if self.rule not in ("or", "and"):
            raise ValueError(f"rule must be 'or' or 'and', got {self.rule!r}")
        if self.last_node_rule not in ("prefix", "neighbors"):
            raise ValueError(f"unknown last_node_rule {self.last_node_rule!r}")
        if self.step3_scope not in ("prefix", "neighbors"):
            raise ValueError(f"unknown step3_scope {self.step3_scope!r}")
        if self.p is not None and self.p < 1:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.n is not None and self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.num_parents < 1 or self.trials < 0:
            raise ValueError("num_parents must be >= 1 and trials >= 0")
        lo, hi = self.theta_range
        object.__setattr__(self, "theta_range", (float(lo), float(hi)))
        if isinstance(self.family, list):
            object.__setattr__(self, "family", tuple(self.family))

    @classmethod
    def from_dict(cls, d: dict) -> "OdsConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        if "lambda_d" in d:
            d["lam_d"] = d.pop("lambda_d")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "theta_range" in d:
            d["theta_range"] = tuple(d["theta_range"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_range"] = list(self.theta_range)
        fam = self.family
        if isinstance(fam, QvfFamily):
            d["family"] = family_to_spec(fam)
        elif isinstance(fam, tuple):
            d["family"] = [family_to_spec(family_from_spec(f)) for f in fam]
        return d

    def families(self, p: int) -> list:
        if isinstance(self.family, tuple):
            fams = [family_from_spec(f) for f in self.family]
            if len(fams) != p:
                raise ValueError(f"config lists {len(fams)} families for p={p}")
            return fams
        return [family_from_spec(self.family)] * p

    def family_label(self) -> str:
        if isinstance(self.family, tuple):
            return "mixed"
        return family_from_spec(self.family).label

    def glm_options(self) -> GlmOptions:
        return GlmOptions(max_iter=self.glm_max_iter, tol=self.glm_tol,
                          standardize=self.standardize)


def default_lambda(family, n: int, p: int) -> float:
    """``const / log(max(n, p))`` on the per-observation loss.

    The binomial constant is stated for a likelihood normalised per
    Bernoulli trial, so it is multiplied by the trial count ``N`` here.
    """
    fam = family_from_spec(family)
    const = _LAMBDA_CONST.get(fam.name)
    if const is None:
        raise ValueError(
            f"no default lambda rule for {fam.label}; set lam explicitly"
        )
    if fam.name == "binomial":
        const *= fam.shape
    return const / math.log(max(n, p, 2))


def _resolve_lambda(value, fams, n, p):
    if value == "auto":
        names = {f.name for f in fams}
        if len(names) != 1:
            raise ValueError("lambda='auto' needs a single family; set lam explicitly")
        return default_lambda(fams[0], n, p)
    return float(value)


@dataclass
class OdsResult:
    ordering: Ordering
    edges: frozenset
    moral_graph: UndirectedGraph
    score_reports: list
    timings_ms: dict
    lam: float
    lam_d: float

    @property
    def p(self):
        return len(self.ordering)

    def degenerate_cells(self) -> int:
        return sum(
            r.degenerate_cells + int(r.degenerate)
            for pos in self.score_reports for r in pos
        )

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "p": self.p,
            "ordering": list(self.ordering.perm),
            "edges": sorted(list(e) for e in self.edges),
            "moral_graph": [list(e) for e in self.moral_graph.sorted_edges()],
            "lambda": self.lam,
            "lambda_d": self.lam_d,
            "timings_ms": self.timings_ms,
            "degenerate_cells": self.degenerate_cells(),
        }
        if verbose:
            out["scores"] = [[r.to_dict() for r in pos] for pos in self.score_reports]
        return out


@dataclass(frozen=True)
class EvalMetrics:
    ordering_consistent: bool | None
    skeleton_hamming_norm: float
    directed_hamming_norm: float
    inserted: int
    deleted: int
    reversed: int
    skeleton_errors: int
    directed_errors: int

    def to_dict(self):
        return asdict(self)


def ods_learn(data, cfg: OdsConfig, true_dag: Dag | None = None) -> OdsResult:
    """Moral graph, then ordering by overdispersion, then parents per node."""
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    if cfg.p is not None and cfg.p != p:
        raise ValueError(f"data has {p} columns, config says p={cfg.p}")
    if (cfg.oracle_moral_graph or cfg.oracle_ordering) and true_dag is None:
        raise ValueError("oracle settings need the true DAG")
    fams = cfg.families(p)
    opts = cfg.glm_options()
    timings = {}

    t0 = time.perf_counter()
    if cfg.oracle_moral_graph:
        moral = moralize(true_dag)
        lam = float("nan") if cfg.lam == "auto" else float(cfg.lam)
    else:
        lam = _resolve_lambda(cfg.lam, fams, n, p)
        try:
            moral = estimate_moral_graph(data, fams, lam, cfg.rule, opts)
        except Exception as exc:
            raise type(exc)(f"step 1: {exc}") from exc
    t1 = time.perf_counter()
    timings["step1_ms"] = (t1 - t0) * 1e3

    if cfg.oracle_ordering:
        ordering, reports = Ordering(tuple(true_dag.topological_order())), []
    else:
        ordering, reports = estimate_ordering(
            data, moral, fams, cfg.c0, cfg.fallback, cfg.candidate_rule, ddof=cfg.ddof
        )
    t2 = time.perf_counter()
    timings["step2_ms"] = (t2 - t1) * 1e3

    lam_d = lam if cfg.lam_d is None else _resolve_lambda(cfg.lam_d, fams, n, p)
    if math.isnan(lam_d):
        lam_d = _resolve_lambda("auto", fams, n, p)
    edges = set()
    perm = ordering.perm
    adj = moral.adjacency()
    for pos in range(1, p):
        v = perm[pos]
        if pos == p - 1 and cfg.last_node_rule == "neighbors":
            pa = adj[v]
        else:
            preds = perm[:pos]
            if cfg.step3_scope == "neighbors":
                preds = [k for k in preds if k in adj[v]]
            try:
                pa = parent_select(data, v, preds, fams[v], lam_d, opts)
            except Exception as exc:
                raise type(exc)(f"step 3, node {v}: {exc}") from exc
        edges.update((int(k), int(v)) for k in pa)
    timings["step3_ms"] = (time.perf_counter() - t2) * 1e3
    return OdsResult(ordering, frozenset(edges), moral, reports, timings, lam, lam_d)


def _edges_and_p(g, p):
    if isinstance(g, Dag):
        if p is not None and p != g.p:
            raise ValueError(f"dimension mismatch: p={p} vs DAG with p={g.p}")
        return set(g.edges), g.p
    return {(int(a), int(b)) for a, b in g}, p


def _pair_sets(est, truth, p):
    e, p1 = _edges_and_p(est, p)
    t, p2 = _edges_and_p(truth, p)
    if p1 is not None and p2 is not None and p1 != p2:
        raise ValueError(f"dimension mismatch: p={p1} vs p={p2}")
    p = p1 if p1 is not None else p2
    if p is None:
        raise ValueError("node count p is required for bare edge sets")
    for a, b in e | t:
        if not (0 <= a < p and 0 <= b < p) or a == b:
            raise ValueError(f"edge ({a}, {b}) invalid for p={p}")
    return e, t, p


def skeleton_hamming(est, truth, p: int | None = None) -> float:
    """Symmetric difference of undirected skeletons over ``p*(p-1)/2``."""
    e, t, p = _pair_sets(est, truth, p)
    se = {frozenset(x) for x in e}
    st = {frozenset(x) for x in t}
    total = p * (p - 1) // 2
    return len(se ^ st) / total if total else 0.0


def directed_hamming(est, truth, p: int | None = None) -> float:
    """Ordered-pair mismatches over ``p*(p-1)``."""
    e, t, p = _pair_sets(est, truth, p)
    total = p * (p - 1)
    return len(e ^ t) / total if total else 0.0


def evaluate(est, truth, p=None, ordering=None) -> EvalMetrics:
    e, t, p = _pair_sets(est, truth, p)
    se = {frozenset(x) for x in e}
    st = {frozenset(x) for x in t}
    rev = sum(1 for a, b in e if (b, a) in t and (a, b) not in t)
    consistent = None
    if ordering is not None:
        perm = ordering.perm if isinstance(ordering, Ordering) else tuple(ordering)
        pos = {v: i for i, v in enumerate(perm)}
        consistent = all(pos[a] < pos[b] for a, b in t)
    return EvalMetrics(
        ordering_consistent=consistent,
        skeleton_hamming_norm=skeleton_hamming(e, t, p),
        directed_hamming_norm=directed_hamming(e, t, p),
        inserted=len(se - st),
        deleted=len(st - se),
        reversed=rev,
        skeleton_errors=len(se ^ st),
        directed_errors=len(e ^ t),
    )


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def center_intercepts(dag: Dag, families) -> Dag:
    """Set each intercept to ``-sum_k theta_jk * A_k'(0)``.

    The natural parameter then reads ``sum_k theta_jk * (X_k - A_k'(0))``,
    which keeps binomial nodes with positive weights from saturating.
    """
    fams = families if isinstance(families, (list, tuple)) else [families] * dag.p
    ref = np.array([float(f.mean(0.0)) for f in fams])
    theta = dag.theta.copy()
    off = theta.copy()
    np.fill_diagonal(off, 0.0)
    np.fill_diagonal(theta, -(off @ ref))
    return Dag(dag.p, dag.edges, theta, dag.node_family_ids)


def generate(cfg: OdsConfig, rng: np.random.Generator):
    """Random DAG then a dataset drawn from it, both from ``rng``."""
    fams = cfg.families(cfg.p)
    centered = cfg.intercept == "centered"
    dag = random_dag(cfg.p, cfg.num_parents, cfg.theta_range,
                     0.0 if centered else cfg.intercept, rng)
    if centered:
        dag = center_intercepts(dag, fams)
    X = sample_dataset(dag, fams, cfg.n, rng)
    return dag, X


def run_trial(cfg: OdsConfig, trial: int, record_timings: bool = True) -> dict:
    row = {
        "family": cfg.family_label(),
        "p": cfg.p,
        "n": cfg.n,
        "num_parents": cfg.num_parents,
        "trial": trial,
    }
    try:
        dag, X = generate(cfg, trial_rng(cfg.seed, trial))
        res = ods_learn(X, cfg, dag)
        m = evaluate(res.edges, dag, ordering=res.ordering)
        row.update(
            ordering_consistent=int(is_consistent_ordering(dag, res.ordering)),
            skeleton_hamming_norm=m.skeleton_hamming_norm,
            directed_hamming_norm=m.directed_hamming_norm,
            degenerate_cells=res.degenerate_cells(),
            error="",
        )
        for k in ("step1_ms", "step2_ms", "step3_ms"):
            row[k] = round(res.timings_ms[k], 3) if record_timings else ""
    except Exception as exc:  # a failed trial is data, not a crash
        row.update({k: "" for k in RESULT_COLUMNS if k not in row})
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_task(args):
    return run_trial(*args)


def run_benchmark(configs, n_jobs: int = 1, record_timings: bool = True) -> list:
    """One row per (config, trial), in grid order then trial order."""
    tasks = [(cfg, t, record_timings) for cfg in configs for t in range(cfg.trials)]
    if n_jobs == 1:
        return [_run_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_task, tasks, chunksize=1))


def _stats(values):
    values = [float(v) for v in values if v != ""]
    if not values:
        return float("nan"), float("nan")
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), sd


def aggregate(rows) -> list:
    """Mean and sd of each metric per grid point, in first-seen order."""
    groups = {}
    for r in rows:
        key = (r["family"], r["p"], r["n"], r["num_parents"])
        groups.setdefault(key, []).append(r)
    out = []
    for (family, p, n, k), rs in groups.items():
        ok = [r for r in rs if not r["error"]]
        agg = {"family": family, "p": p, "n": n, "num_parents": k,
               "trials": len(rs), "failed": len(rs) - len(ok)}
        for col in ("ordering_consistent", "skeleton_hamming_norm",
                    "directed_hamming_norm", "step1_ms", "step2_ms", "step3_ms"):
            agg[f"{col}_mean"], agg[f"{col}_sd"] = _stats(r[col] for r in ok)
        out.append(agg)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_to_csv(rows, columns=RESULT_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def expand_grid(doc) -> list:
    """Configs from a JSON grid document.

    Either a list of config objects, a single config object, or
    ``{"base": {...}, "sweep": {"n": [...], ...}}`` whose sweep is
    expanded as a cartesian product (keys in the given order).
    """
    if isinstance(doc, list):
        return [OdsConfig.from_dict(d) for d in doc]
    if "base" in doc or "sweep" in doc:
        base = doc.get("base", {})
        sweep = doc.get("sweep", {})
        keys = list(sweep)
        out = []
        for combo in itertools.product(*(sweep[k] for k in keys)):
            d = dict(base)
            d.update(zip(keys, combo))
            out.append(OdsConfig.from_dict(d))
        return out
    return [OdsConfig.from_dict(doc)]


def with_overrides(cfg: OdsConfig, **kw) -> OdsConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})

