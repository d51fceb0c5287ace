"""Command-line entry point for all workflows.

Every analysis subcommand reads a relation CSV plus a ranking file and writes
an explanation report as JSON to stdout or --out.  Exit codes: 0 on success
or SATISFIABLE, 3 when the answer is UNSATISFIABLE, 1 on errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .approx import cell_solve, local_explain
from .baselines import linear_regression_weights, ordinal_regression_weights, sampling_search
from .engine import SolverConfig
from .evaluate import (
    ExplanationReport,
    metrics,
    position_error,
    solve_opt,
    solve_with_escalation,
)
from .formulate import EpsilonConfig, ProblemSpec, WeightPredicate, parse_weight_predicate
from .model import (
    NormMode,
    NormalizationStats,
    WeightVector,
    build_unsat_ranking,
    generate_uniform,
    load_ranking,
    load_relation,
    ranking_by_attribute_sum,
    ranking_to_text,
    relation_to_csv,
    transform_weights,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSAT = 3


def _add_io_args(sub):
    sub.add_argument("relation", help="relation CSV (first column 'id')")
    sub.add_argument("ranking", help="ranking file (one id per line, '>'/'=' prefixes)")
    sub.add_argument("--dedup", action="store_true", help="drop duplicate attribute rows")
    sub.add_argument("--out", help="write the report JSON here instead of stdout")


def _add_common_solver_args(sub):
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--constraints", help="weight predicate file (one constraint per line)")
    sub.add_argument("--eps1", type=float, default=1e-4)
    sub.add_argument("--tau", type=float, default=1e-9)
    sub.add_argument("--time-limit", type=float, default=None)
    sub.add_argument("--threads", type=int, default=1,
                     help="reserved; the bundled engine runs deterministic single-threaded")
    sub.add_argument("--no-verify", action="store_true", help="skip solution verification")


def _add_opt_args(sub):
    _add_common_solver_args(sub)
    sub.add_argument("--eps2", type=float, default=0.0)
    sub.add_argument("--importance", help="CSV with header id,factor")
    sub.add_argument("--objective", choices=["sum", "max"], default="sum")
    sub.add_argument("--no-prune", action="store_true",
                     help="keep dominance-resolved indicators (testing aid)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankfit",
        description="Explain a given top-k ranking with linear scoring functions.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sat = subs.add_parser("sat", help="is exact top-k reproduction possible?")
    _add_io_args(sat)
    _add_common_solver_args(sat)

    opt = subs.add_parser("opt", help="minimize total position error over the top-k")
    _add_io_args(opt)
    _add_opt_args(opt)

    cell = subs.add_parser("cell", help="solve inside a cell around a seed weight vector")
    _add_io_args(cell)
    _add_opt_args(cell)
    cell.add_argument("--seed-strategy", choices=["sample", "window", "lr", "ordreg", "explicit"],
                      default="ordreg")
    cell.add_argument("--cell-size", type=float, default=0.01)
    cell.add_argument("--samples", type=int, default=1000)
    cell.add_argument("--window", type=int, default=None)
    cell.add_argument("--weights", help="JSON weight file for --seed-strategy explicit")
    cell.add_argument("--seed", type=int, default=0)

    local = subs.add_parser("local", help="shrink (k, n) until the solve behaves")
    _add_io_args(local)
    _add_opt_args(local)
    local.add_argument("--shrink", type=float, default=0.8)
    local.add_argument("--max-error", type=float, default=None)

    base = subs.add_parser("baseline", help="run a baseline method")
    _add_io_args(base)
    _add_common_solver_args(base)
    base.add_argument("--method", choices=["lr", "ordreg", "sample"], required=True)
    base.add_argument("--samples", type=int, default=1000)
    base.add_argument("--seed", type=int, default=0)

    ver = subs.add_parser("verify", help="recompute error and metrics for given weights")
    _add_io_args(ver)
    ver.add_argument("--k", type=int, required=True)
    ver.add_argument("--weights", required=True, help="JSON file {attribute: weight}")
    ver.add_argument("--tau", type=float, default=1e-9)
    ver.add_argument("--importance")

    norm = subs.add_parser("normalize", help="transform weights for normalized data")
    norm.add_argument("relation")
    norm.add_argument("--weights", required=True, help="JSON file {attribute: weight}")
    norm.add_argument("--mode", choices=[m.value for m in NormMode], required=True)
    norm.add_argument("--out")

    gen = subs.add_parser("gen", help="generate synthetic uniform data")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--unsat", action="store_true",
                     help="also emit a ranking no linear function reproduces for k=5")
    gen.add_argument("--out", required=True, help="CSV output path")
    gen.add_argument("--ranking-out", help="ranking file output path")

    return parser


def _load_inputs(args):
    relation = load_relation(args.relation, dedup=args.dedup)
    ranking = load_ranking(args.ranking)
    return relation, ranking


def _load_predicate(args, relation) -> WeightPredicate:
    if getattr(args, "constraints", None):
        with open(args.constraints, "r", encoding="utf-8") as fh:
            return parse_weight_predicate(fh.read(), relation.columns)
    return WeightPredicate.empty()


def _load_importance(args, relation) -> dict[str, float]:
    path = getattr(args, "importance", None)
    if not path:
        return {}
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["id", "factor"]:
            raise ValueError("importance file needs header: id,factor")
        for row in reader:
            if not row:
                continue
            tid = row[0].strip()
            if tid not in relation:
                raise ValueError(f"importance for unknown id {tid!r}")
            out[tid] = float(row[1])
    return out


def _load_weight_file(path, relation) -> WeightVector:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    missing = [c for c in relation.columns if c not in data]
    if missing:
        raise ValueError(f"weight file missing attributes: {missing}")
    return WeightVector.normalized([float(data[c]) for c in relation.columns])


def _spec_from_args(args, relation, ranking, with_opt=False) -> ProblemSpec:
    eps = EpsilonConfig(tau=args.tau, eps1=args.eps1,
                        eps2=getattr(args, "eps2", 0.0),
                        enforce_floor=False)
    return ProblemSpec(
        relation, ranking, args.k,
        predicate=_load_predicate(args, relation),
        importance=_load_importance(args, relation) if with_opt else {},
        eps=eps,
        objective=getattr(args, "objective", "sum"),
    )


def _solver_config(args) -> SolverConfig:
    return SolverConfig(time_limit=getattr(args, "time_limit", None),
                        threads=getattr(args, "threads", 1))


def _emit(args, payload: dict | ExplanationReport) -> None:
    text = payload.to_json() if isinstance(payload, ExplanationReport) else json.dumps(payload, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _exit_code(report: ExplanationReport) -> int:
    return EXIT_UNSAT if report.status == "UNSATISFIABLE" else EXIT_OK


def _cmd_sat(args) -> int:
    relation, ranking = _load_inputs(args)
    spec = _spec_from_args(args, relation, ranking)
    report = solve_with_escalation(spec, "sat", config=_solver_config(args),
                                   verify=not args.no_verify)
    _emit(args, report)
    return _exit_code(report)


def _cmd_opt(args) -> int:
    relation, ranking = _load_inputs(args)
    spec = _spec_from_args(args, relation, ranking, with_opt=True)
    report = solve_with_escalation(spec, "opt", config=_solver_config(args),
                                   verify=not args.no_verify, prune=not args.no_prune)
    _emit(args, report)
    return _exit_code(report)


def _cmd_cell(args) -> int:
    relation, ranking = _load_inputs(args)
    spec = _spec_from_args(args, relation, ranking, with_opt=True)
    weights = _load_weight_file(args.weights, relation) if args.weights else None
    report = cell_solve(spec, strategy=args.seed_strategy, cell_size=args.cell_size,
                        samples=args.samples, window=args.window, weights=weights,
                        seed=args.seed, config=_solver_config(args))
    _emit(args, report)
    return _exit_code(report)


def _cmd_local(args) -> int:
    relation, ranking = _load_inputs(args)
    spec = _spec_from_args(args, relation, ranking, with_opt=True)
    result = local_explain(spec, shrink=args.shrink, config=_solver_config(args),
                           max_error=args.max_error)
    if result.report is None:
        _emit(args, {"succeeded": False, "attempts": result.attempts})
        return EXIT_ERROR
    result.report.context["local"] = {
        "k_used": result.k_used,
        "n_lower": result.n_lower,
        "succeeded": result.succeeded,
        "solves": result.solves,
    }
    _emit(args, result.report)
    return _exit_code(result.report)


def _cmd_baseline(args) -> int:
    relation, ranking = _load_inputs(args)
    spec = _spec_from_args(args, relation, ranking)
    if args.method == "lr":
        fit = linear_regression_weights(relation, ranking)
        weights = fit.projected
        extra = {"raw": dict(zip(relation.columns, fit.raw)), "intercept": fit.intercept}
    elif args.method == "ordreg":
        fit = ordinal_regression_weights(spec, _solver_config(args))
        weights = fit.weights
        extra = {"penalty": fit.penalty}
    else:
        found = sampling_search(spec, samples=args.samples, seed=args.seed)
        weights = found.weights
        extra = {"evaluated": found.evaluated}
    err = position_error(relation, ranking, weights, args.k)
    payload = {
        "method": args.method,
        "weights": weights.by_column(relation.columns),
        "total_error": err.total,
        "metrics": metrics(relation, ranking, weights, args.k),
        **extra,
    }
    _emit(args, payload)
    return EXIT_OK


def _cmd_verify(args) -> int:
    relation, ranking = _load_inputs(args)
    weights = _load_weight_file(args.weights, relation)
    importance = _load_importance(args, relation)
    err = position_error(relation, ranking, weights, args.k, importance, tie_tol=args.tau)
    payload = {
        "weights": weights.by_column(relation.columns),
        "total_error": err.total,
        "per_tuple": [
            {"id": r, "given_rank": err.given[r], "achieved_rank": err.achieved[r],
             "error": err.raw[r]}
            for r in ranking.top_k_ids(args.k)
        ],
        "metrics": metrics(relation, ranking, weights, args.k, tie_tol=args.tau),
    }
    _emit(args, payload)
    return EXIT_OK


def _cmd_normalize(args) -> int:
    relation = load_relation(args.relation)
    weights = _load_weight_file(args.weights, relation)
    stats = NormalizationStats.from_relation(relation)
    out = transform_weights(weights, stats, NormMode(args.mode))
    payload = {
        "mode": args.mode,
        "weights_raw_data": weights.by_column(relation.columns),
        "weights_normalized_data": out.by_column(relation.columns),
    }
    _emit(args, payload)
    return EXIT_OK


def _cmd_gen(args) -> int:
    relation = generate_uniform(args.n, args.m, seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(relation_to_csv(relation))
    ranking_path = args.ranking_out
    if args.unsat or ranking_path:
        ranking = build_unsat_ranking(relation) if args.unsat else ranking_by_attribute_sum(relation)
        if not ranking_path:
            raise ValueError("--unsat needs --ranking-out to store the ranking")
        with open(ranking_path, "w", encoding="utf-8") as fh:
            fh.write(ranking_to_text(ranking))
    return EXIT_OK


_COMMANDS = {
    "sat": _cmd_sat,
    "opt": _cmd_opt,
    "cell": _cmd_cell,
    "local": _cmd_local,
    "baseline": _cmd_baseline,
    "verify": _cmd_verify,
    "normalize": _cmd_normalize,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
