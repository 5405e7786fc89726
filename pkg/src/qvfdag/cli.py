"""Command-line entry point: ``qvfdag {generate,learn,evaluate,benchmark}``.

Exit status is 0 on success, 2 for unusable input (bad config, unparsable
files) and 1 when a workflow fails part-way.  Diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from pathlib import Path

from . import io as qio
from .pipeline import (
    OdsConfig,
    aggregate,
    evaluate,
    expand_grid,
    generate,
    ods_learn,
    results_to_csv,
    run_benchmark,
    trial_rng,
)

log = logging.getLogger("qvfdag")


class UsageError(Exception):
    pass


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _config(path, **overrides) -> OdsConfig:
    doc = _load_json(path) if path else {}
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: expected a JSON object")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return OdsConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def _seed(args, doc_seed=None):
    if args.seed is not None:
        return args.seed
    if doc_seed is not None:
        return doc_seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def cmd_generate(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    seed = _seed(args, doc.get("seed") if isinstance(doc, dict) else None)
    cfg = _config(args.config, seed=seed)
    if cfg.p is None or cfg.n is None:
        raise UsageError("generate needs p and n in the config")
    dag, X = generate(cfg, trial_rng(cfg.seed, args.trial))
    prefix = args.out
    qio.write_count_matrix(f"{prefix}_data.csv", X)
    qio.write_edges(f"{prefix}_dag.txt", dag.edges, dag.p)
    print(f"p={dag.p} n={X.shape[0]} edges={len(dag.edges)} seed={cfg.seed}")
    return 0


def cmd_learn(args) -> int:
    try:
        X = qio.read_count_matrix(args.data)
    except FileNotFoundError:
        raise UsageError(f"data file not found: {args.data}") from None
    except qio.ParseError as exc:
        raise UsageError(str(exc)) from None
    cfg = _config(args.config, p=None)
    if X.shape[0] == 0:
        raise UsageError(f"{args.data}: no data rows")
    cfg = OdsConfig.from_dict({**cfg.to_dict(), "p": X.shape[1], "n": X.shape[0]})
    res = ods_learn(X, cfg)
    prefix = args.out
    qio.write_ordering(f"{prefix}_ordering.txt", res.ordering.perm)
    qio.write_edges(f"{prefix}_edges.txt", res.edges, res.p)
    qio.write_edges(f"{prefix}_moral.txt", res.moral_graph.edges, res.p, undirected=True)
    report = res.to_dict(verbose=args.verbose)
    Path(f"{prefix}_report.json").write_text(json.dumps(report, indent=2) + "\n")
    log.info("ordering %s, %d edges", " ".join(map(str, res.ordering.perm)), len(res.edges))
    return 0


def _read_edges(path):
    try:
        edges, p, undirected = qio.read_edges(path)
    except FileNotFoundError:
        raise UsageError(f"edge file not found: {path}") from None
    except qio.ParseError as exc:
        raise UsageError(str(exc)) from None
    if undirected:
        raise UsageError(f"{path}: expected directed edges")
    return edges, p


def cmd_evaluate(args) -> int:
    est, p_est = _read_edges(args.est)
    truth, p_true = _read_edges(args.truth)
    ps = {p for p in (args.p, p_est, p_true) if p is not None}
    if len(ps) > 1:
        raise UsageError(f"inconsistent node counts: {sorted(ps)}")
    if not ps:
        raise UsageError("node count unknown; pass --p")
    p = ps.pop()
    ordering = qio.read_ordering(args.ordering) if args.ordering else None
    try:
        m = evaluate(est, truth, p, ordering)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(json.dumps(m.to_dict(), indent=2))
    return 0


def cmd_benchmark(args) -> int:
    doc = _load_json(args.config)
    try:
        configs = expand_grid(doc)
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"invalid grid: {exc}") from None
    if args.seed is not None:
        configs = [OdsConfig.from_dict({**c.to_dict(), "seed": args.seed}) for c in configs]
    if args.trials is not None:
        configs = [OdsConfig.from_dict({**c.to_dict(), "trials": args.trials}) for c in configs]
    for c in configs:
        if c.p is None or c.n is None:
            raise UsageError("every grid point needs p and n")
    rows = run_benchmark(configs, n_jobs=args.jobs, record_timings=args.timings)
    Path(args.out).write_text(results_to_csv(rows))
    summary = aggregate(rows)
    for s in summary:
        print(
            f"{s['family']} p={s['p']} n={s['n']} trials={s['trials']} "
            f"failed={s['failed']} ordering={s['ordering_consistent_mean']:.3f} "
            f"skeleton={s['skeleton_hamming_norm_mean']:.4f} "
            f"directed={s['directed_hamming_norm_mean']:.4f}"
        )
    if args.summary:
        cols = list(summary[0]) if summary else []
        Path(args.summary).write_text(results_to_csv(summary, cols))
    for r in rows:
        if r["error"]:
            log.warning("trial %s (p=%s n=%s) failed: %s", r["trial"], r["p"], r["n"], r["error"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    ap = argparse.ArgumentParser(
        prog="qvfdag", description=__doc__.splitlines()[0], parents=[common]
    )
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample a random DAG and a dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True, help="output prefix")
    g.add_argument("--seed", type=int)
    g.add_argument("--trial", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    lr = sub.add_parser("learn", parents=[common], help="learn ordering and DAG from a data CSV")
    lr.add_argument("--data", required=True)
    lr.add_argument("--config")
    lr.add_argument("--out", required=True, help="output prefix")
    lr.add_argument("--seed", type=int, help="accepted for symmetry; learning is deterministic")
    lr.set_defaults(func=cmd_learn)

    ev = sub.add_parser("evaluate", parents=[common], help="compare an estimated edge list to the truth")
    ev.add_argument("--est", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--p", type=int)
    ev.add_argument("--ordering")
    ev.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", parents=[common], help="run a Monte-Carlo grid")
    b.add_argument("--config", required=True, help="grid JSON")
    b.add_argument("--out", required=True, help="per-trial results CSV")
    b.add_argument("--summary", help="optional aggregate CSV")
    b.add_argument("--seed", type=int)
    b.add_argument("--trials", type=int)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timings", action=argparse.BooleanOptionalAction, default=True,
                   help="record wall-clock columns (off gives byte-stable output)")
    b.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.verbose = getattr(args, "verbose", False)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

