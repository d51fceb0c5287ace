"""Position-error metrics, report assembly, verification, and escalation.

Verification recomputes the score-based ranking with tie tolerance tau
(scores at most tau apart are practically indistinguishable) and compares it
against what the solver claimed; on mismatch the strict-gap margin is raised
by the escalation factor and the solve repeats.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .engine import SolverConfig, Status, solve_lp, solve_milp
from .formulate import (
    EpsilonConfig,
    IndicatorLayout,
    ProblemSpec,
    build_opt,
    build_sat,
    compute_dominance,
    make_rounding_heuristic,
)
from .model import Relation, WeightVector, ranking_from_scores

SCHEMA_VERSION = 1
_OBJ_MATCH_TOL = 1e-6


@dataclass
class ErrorBreakdown:
    total: float
    per_tuple: dict[str, float]   # importance-weighted contribution
    raw: dict[str, int]           # |achieved - given| per top-k tuple
    achieved: dict[str, int]
    given: dict[str, int]


def position_error(relation: Relation, ranking, weights: WeightVector, k: int,
                   importance=None, tie_tol: float = 0.0) -> ErrorBreakdown:
    """Importance-weighted sum of |score-rank - given-rank| over the top-k."""
    importance = importance or {}
    scored = ranking_from_scores(relation, weights, tie_tol)
    rho = scored.rank_map()
    top = ranking.top_k_ids(k)
    per = {}
    raw = {}
    achieved = {}
    given = {}
    total = 0.0
    for r in top:
        diff = abs(rho[r] - ranking.rank_of(r))
        u = float(importance.get(r, 1.0))
        per[r] = u * diff
        raw[r] = diff
        achieved[r] = rho[r]
        given[r] = ranking.rank_of(r)
        total += u * diff
    return ErrorBreakdown(total, per, raw, achieved, given)


def metrics(relation: Relation, ranking, weights: WeightVector, k: int,
            tie_tol: float = 0.0) -> dict:
    """Inversions against the full relation plus the largest position error."""
    scored = ranking_from_scores(relation, weights, tie_tol)
    rho = scored.rank_map()
    top = ranking.top_k_ids(k)
    pi_top = np.array([ranking.rank_of(r) for r in top])
    rho_top = np.array([rho[r] for r in top])
    pi_all = np.array([ranking.rank_of(s) for s in relation.ids])
    rho_all = np.array([rho[s] for s in relation.ids])
    inv = (pi_top[:, None] < pi_all[None, :]) & (rho_top[:, None] > rho_all[None, :])
    max_err = int(np.max(np.abs(rho_top - pi_top))) if len(top) else 0
    return {"inversions": int(inv.sum()), "max_position_error": max_err}


def pairwise_penalty(relation: Relation, ranking, weights: WeightVector) -> float:
    """Sum of score surpluses over all inverted pairs of the whole relation."""
    scored = ranking_from_scores(relation, weights, 0.0)
    rho = scored.rank_map()
    s = scored.score_map()
    ids = relation.ids
    total = 0.0
    for i, r in enumerate(ids):
        for q in ids:
            if ranking.rank_of(r) < ranking.rank_of(q) and rho[r] > rho[q]:
                total += s[q] - s[r]
    return total


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ExplanationReport:
    """Canonical solve outcome: weights, errors, metrics, and provenance."""

    mode: str
    status: str
    k: int
    schema: int = SCHEMA_VERSION
    weights: dict[str, float] | None = None
    objective: float | None = None
    total_error: float | None = None
    per_tuple: list[dict] = field(default_factory=list)
    metrics: dict | None = None
    eps: dict = field(default_factory=dict)
    verified: bool = False
    escalations: int = 0
    engine: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    context: dict = field(default_factory=dict)
    timestamp: str = ""

    def weight_vector(self, columns) -> WeightVector | None:
        if self.weights is None:
            return None
        return WeightVector.normalized([self.weights[c] for c in columns])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        # stable field order for byte-identical output modulo timestamp
        order = ["schema", "mode", "status", "k", "weights", "objective", "total_error",
                 "per_tuple", "metrics", "eps", "verified", "escalations", "engine",
                 "notes", "context", "timestamp"]
        return {key: d[key] for key in order}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExplanationReport":
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in fields})


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _eps_dict(eps: EpsilonConfig) -> dict:
    return {"tau": eps.tau, "eps1": eps.eps1, "eps2": eps.eps2}


def _finite_or_none(value):
    if value is None or not math.isfinite(value):
        return None
    return value


def _engine_dict(sol) -> dict:
    return {
        "status": sol.status.value,
        "nodes": sol.nodes,
        "iterations": sol.iterations,
        "best_bound": _finite_or_none(sol.best_bound),
        "dual_bound": _finite_or_none(sol.dual_bound),
    }


def _fill_solution_details(report: ExplanationReport, spec: ProblemSpec,
                           weights: WeightVector, eps: EpsilonConfig):
    err = position_error(spec.relation, spec.ranking, weights, spec.k,
                         spec.importance, tie_tol=eps.tau)
    report.weights = weights.by_column(spec.relation.columns)
    report.total_error = err.total
    report.per_tuple = [
        {
            "id": r,
            "given_rank": err.given[r],
            "achieved_rank": err.achieved[r],
            "error": err.raw[r],
            "weighted_error": err.per_tuple[r],
            "importance": spec.importance_of(r),
        }
        for r in spec.top_ids()
    ]
    report.metrics = metrics(spec.relation, spec.ranking, weights, spec.k, tie_tol=eps.tau)
    return err


def verify_report(report: ExplanationReport, spec: ProblemSpec,
                  eps: EpsilonConfig | None = None) -> bool:
    """Check the solver's claim against scores recomputed from the weights."""
    eps = eps or spec.eps
    if report.status == "UNSATISFIABLE":
        return True
    if report.weights is None:
        return False
    weights = report.weight_vector(spec.relation.columns)
    err = position_error(spec.relation, spec.ranking, weights, spec.k,
                         spec.importance, tie_tol=eps.tau)
    if report.mode == "sat":
        return all(err.achieved[r] == err.given[r] for r in spec.top_ids())
    if spec.objective == "max":
        score_side = max(err.raw.values(), default=0)
    else:
        score_side = err.total
    if report.objective is None:
        return False
    return abs(score_side - report.objective) <= _OBJ_MATCH_TOL


# ---------------------------------------------------------------------------
# Solve drivers


def solve_sat(spec: ProblemSpec, config: SolverConfig | None = None,
              eps: EpsilonConfig | None = None, verify: bool = True) -> ExplanationReport:
    """Decide exact reproducibility of the top-k; certificate included when SATISFIABLE."""
    eps = eps or spec.eps
    config = config or SolverConfig(feas_tol=min(1e-9, eps.tau))
    program, wvars = build_sat(spec, eps)
    sol = solve_lp(program, config)
    report = ExplanationReport(mode="sat", status="", k=spec.k, eps=_eps_dict(eps),
                               engine=_engine_dict(sol), timestamp=_now())
    if sol.status is Status.OPTIMAL:
        report.status = "SATISFIABLE"
        weights = WeightVector.normalized([sol.values[wvars[c]] for c in spec.relation.columns])
        _fill_solution_details(report, spec, weights, eps)
        report.objective = 0.0
        if verify:
            report.verified = verify_report(report, spec, eps)
        else:
            report.verified = False
            report.notes.append("verification disabled")
    elif sol.status is Status.INFEASIBLE:
        report.status = "UNSATISFIABLE"
        report.verified = True
        report.notes.append(
            "no weight vector reproduces the top-k at the current margins; "
            "a smaller eps1 could in principle admit solutions")
    else:
        report.status = sol.status.value
        report.verified = False
        if sol.message:
            report.notes.append(sol.message)
    return report


def solve_opt(spec: ProblemSpec, config: SolverConfig | None = None,
              eps: EpsilonConfig | None = None, *, prune: bool = True,
              strengthen: bool = True, use_heuristic: bool = True,
              weight_bounds: dict[str, tuple[float, float]] | None = None,
              verify: bool = True) -> ExplanationReport:
    """Minimize total (importance-weighted) position error over the top-k."""
    report, _layout, _sol = solve_opt_detailed(
        spec, config, eps, prune=prune, strengthen=strengthen,
        use_heuristic=use_heuristic, weight_bounds=weight_bounds, verify=verify)
    return report


def solve_opt_detailed(spec: ProblemSpec, config: SolverConfig | None = None,
                       eps: EpsilonConfig | None = None, *, prune: bool = True,
                       strengthen: bool = True, use_heuristic: bool = True,
                       weight_bounds: dict[str, tuple[float, float]] | None = None,
                       seed_weights: WeightVector | None = None,
                       verify: bool = True):
    eps = eps or spec.eps
    config = config or SolverConfig(feas_tol=min(1e-9, eps.tau))
    dominance = compute_dominance(spec.relation) if prune else None
    program, layout = build_opt(spec, eps, dominance=dominance, prune=prune,
                                strengthen=strengthen)
    if weight_bounds:
        for col, (lo, hi) in weight_bounds.items():
            program.set_bounds(layout.weight_vars[col], max(0.0, lo), min(1.0, hi))
    if use_heuristic:
        config = dataclasses.replace(config, heuristic=make_rounding_heuristic(spec, layout, eps))
    if seed_weights is not None:
        from .formulate import decoded_delta_assignment

        incumbent = decoded_delta_assignment(spec, layout, seed_weights.as_array(), eps)
        if incumbent is not None:
            config = dataclasses.replace(config, initial_incumbent=incumbent)
    sol = solve_milp(program, config)
    report = ExplanationReport(mode="opt", status="", k=spec.k, eps=_eps_dict(eps),
                               engine=_engine_dict(sol), timestamp=_now())
    if sol.status in (Status.OPTIMAL, Status.TIMEOUT_BEST) and sol.values is not None:
        report.status = "OPTIMAL" if sol.status is Status.OPTIMAL else "TIMEOUT_BEST"
        report.objective = sol.objective
        weights = WeightVector.normalized(
            [sol.values[layout.weight_vars[c]] for c in spec.relation.columns])
        _fill_solution_details(report, spec, weights, eps)
        if verify:
            report.verified = verify_report(report, spec, eps)
        else:
            report.verified = False
            report.notes.append("verification disabled")
    elif sol.status is Status.INFEASIBLE:
        report.status = "UNSATISFIABLE"
        report.verified = True
        report.notes.append("constraints admit no weight vector (weight predicate too strict)")
    elif sol.status is Status.TIMEOUT_BEST:
        report.status = "TIMEOUT_BEST"
        report.verified = False
        report.notes.append("budget exhausted before any incumbent was found")
    else:
        report.status = sol.status.value
        report.verified = False
        if sol.message:
            report.notes.append(sol.message)
    return report, layout, sol


def solve_with_escalation(spec: ProblemSpec, mode: str = "sat",
                          config: SolverConfig | None = None,
                          eps0: EpsilonConfig | None = None,
                          verify: bool = True, **solve_kwargs) -> ExplanationReport:
    """Build, solve, verify; on verification failure raise eps1 tenfold and repeat.

    Infeasibility returns immediately (the margin-raising loop only applies to
    returned solutions).  When the escalation budget runs out the last report
    is returned flagged unverified.
    """
    if mode not in ("sat", "opt"):
        raise ValueError("mode must be 'sat' or 'opt'")
    eps = eps0 or spec.eps
    report = None
    for attempt in range(eps.max_escalations + 1):
        if mode == "sat":
            report = solve_sat(spec, config, eps, verify=verify)
        else:
            report = solve_opt(spec, config, eps, verify=verify, **solve_kwargs)
        report.escalations = attempt
        if report.status == "UNSATISFIABLE":
            return report
        if not verify:
            return report
        if report.verified:
            return report
        if report.weights is None:
            # solver trouble rather than a tolerance mismatch: nothing to escalate
            return report
        eps = eps.escalated()
    report.notes.append("escalation budget exhausted without a verified solution")
    return report
