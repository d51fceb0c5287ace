"""Scalability heuristics: cell-restricted search, sliding windows, local scope.

The exact minimum-error solve can be too slow for large k and n.  These
helpers trade optimality for time: restrict the weight search to a small
hypercube around a promising seed, solve windows of adjacent tuples, or
shrink (k, n) until the solve behaves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import linear_regression_weights, ordinal_regression_weights, sampling_search
from .engine import SolverConfig
from .evaluate import ExplanationReport, position_error, solve_opt_detailed
from .formulate import EpsilonConfig, ProblemSpec
from .model import WeightVector

SEED_STRATEGIES = ("sample", "window", "lr", "ordreg", "explicit")


@dataclass(frozen=True)
class CellSpec:
    """Axis-aligned hypercube around a simplex point, intersected with the simplex."""

    center: WeightVector
    half_width: float

    def __post_init__(self):
        if not 0 < self.half_width:
            raise ValueError("cell half-width must be > 0")

    def bounds(self, columns) -> dict[str, tuple[float, float]]:
        return {
            c: (max(0.0, v - self.half_width), min(1.0, v + self.half_width))
            for c, v in zip(columns, self.center.values)
        }


def seed_weights(spec: ProblemSpec, strategy: str, *, samples: int = 1000,
                 window: int | None = None, weights: WeightVector | None = None,
                 seed: int = 0, config: SolverConfig | None = None) -> WeightVector:
    """Pick a promising center point for the cell."""
    if strategy not in SEED_STRATEGIES:
        raise ValueError(f"unknown seed strategy {strategy!r}; choose from {SEED_STRATEGIES}")
    if strategy == "sample":
        return sampling_search(spec, samples=samples, seed=seed).weights
    if strategy == "window":
        size = window or min(spec.k, spec.relation.n)
        return sliding_window_solve(spec, size, config=config).seed
    if strategy == "lr":
        return linear_regression_weights(spec.relation, spec.ranking).projected
    if strategy == "ordreg":
        return ordinal_regression_weights(spec, config).weights
    if weights is None:
        raise ValueError("explicit strategy needs a weight vector")
    return weights


def cell_solve(spec: ProblemSpec, strategy: str = "ordreg", cell_size: float = 0.01, *,
               samples: int = 1000, window: int | None = None,
               weights: WeightVector | None = None, seed: int = 0,
               config: SolverConfig | None = None,
               eps: EpsilonConfig | None = None) -> ExplanationReport:
    """Solve the minimum-error problem restricted to a cell around a seed point.

    The seed itself lies in the cell, so (whenever its induced indicator
    assignment is representable at the margins) the reported error never
    exceeds the seed's.
    """
    center = seed_weights(spec, strategy, samples=samples, window=window,
                          weights=weights, seed=seed, config=config)
    cell = CellSpec(center, cell_size)
    seed_err = position_error(spec.relation, spec.ranking, center, spec.k,
                              spec.importance).total
    report, _layout, _sol = solve_opt_detailed(
        spec, config, eps, weight_bounds=cell.bounds(spec.relation.columns),
        seed_weights=center)
    report.context["cell"] = {
        "strategy": strategy,
        "size": cell_size,
        "center": center.by_column(spec.relation.columns),
        "seed_error": seed_err,
    }
    return report


@dataclass
class WindowResult:
    reports: list[ExplanationReport]
    seed: WeightVector
    starts: list[int]


def sliding_window_solve(spec: ProblemSpec, window: int,
                         config: SolverConfig | None = None,
                         eps: EpsilonConfig | None = None) -> WindowResult:
    """Solve the exact problem on windows of adjacent tuples of the ranking.

    Windows of ``window`` tuples slide top to bottom with half-window stride;
    each window is solved as a complete instance (k = window size).  The
    combined seed averages the window solutions, weighting each by
    1 / (1 + error) and renormalizing onto the simplex.
    """
    n = spec.relation.n
    if not 1 <= window <= min(spec.k, n):
        raise ValueError("window size must satisfy 1 <= window <= min(k, n)")
    stride = max(1, math.ceil(window / 2))
    starts = list(range(0, n - window + 1, stride))
    if starts[-1] != n - window:
        starts.append(n - window)
    reports = []
    acc = np.zeros(spec.relation.m)
    acc_weight = 0.0
    for start in starts:
        ids = spec.ranking.order[start:start + window]
        sub_rel = spec.relation.subset(ids)
        sub_rank = spec.ranking.window(start, window)
        sub_imp = {t: u for t, u in spec.importance.items() if t in set(ids)}
        sub = ProblemSpec(sub_rel, sub_rank, window, predicate=spec.predicate,
                          importance=sub_imp, eps=spec.eps, objective=spec.objective)
        report, _layout, _sol = solve_opt_detailed(sub, config, eps)
        report.context["window"] = {"start": start, "size": window}
        reports.append(report)
        if report.weights is not None:
            wv = np.array([report.weights[c] for c in spec.relation.columns])
            share = 1.0 / (1.0 + (report.total_error or 0.0))
            acc += share * wv
            acc_weight += share
    if acc_weight <= 0:
        seed = WeightVector.uniform(spec.relation.m)
    else:
        seed = WeightVector.normalized(acc / acc_weight)
    return WindowResult(reports, seed, starts)


@dataclass
class LocalExplainResult:
    report: ExplanationReport | None
    k_used: int
    n_lower: int
    succeeded: bool
    attempts: list[dict] = field(default_factory=list)

    @property
    def solves(self) -> int:
        return len(self.attempts)


def default_exception(max_error: float | None = None):
    """Exception predicate: solver trouble, unverified answers, or high error."""

    def check(report: ExplanationReport) -> bool:
        if report.status not in ("OPTIMAL",):
            return True
        if not report.verified:
            return True
        if max_error is not None and (report.total_error or 0.0) > max_error:
            return True
        return False

    return check


def local_explain(spec: ProblemSpec, shrink: float = 0.8, exception=None,
                  config: SolverConfig | None = None,
                  eps: EpsilonConfig | None = None,
                  max_error: float | None = None) -> LocalExplainResult:
    """Shrink the problem until it solves cleanly.

    Tries the full instance first.  On exception, walks k down a geometric
    sequence (ceil(shrink^x * k)); for each k the largest count of
    lower-ranked tuples kept below the top block is found by binary search
    over prefixes of the ranking.
    """
    if not 0 < shrink < 1:
        raise ValueError("shrink must be in (0, 1)")
    check_exception = exception or default_exception(max_error)
    attempts: list[dict] = []

    def attempt(k_val: int, n_lower: int):
        ids = spec.ranking.order[: k_val + n_lower]
        sub_rel = spec.relation.subset(ids)
        sub_rank = spec.ranking.prefix(k_val + n_lower)
        sub_imp = {t: u for t, u in spec.importance.items() if t in set(ids)}
        sub = ProblemSpec(sub_rel, sub_rank, k_val, predicate=spec.predicate,
                          importance=sub_imp, eps=spec.eps, objective=spec.objective)
        report, _layout, _sol = solve_opt_detailed(sub, config, eps)
        bad = check_exception(report)
        attempts.append({"k": k_val, "n_lower": n_lower, "exception": bad})
        return report, bad

    n = spec.relation.n
    report, bad = attempt(spec.k, n - spec.k)
    if not bad:
        return LocalExplainResult(report, spec.k, n - spec.k, True, attempts)

    seen = {spec.k}
    x = 1
    while True:
        k_val = max(1, math.ceil(spec.k * (shrink ** x)))
        x += 1
        if k_val in seen:
            if k_val <= 1:
                break
            continue
        seen.add(k_val)
        cap = n - k_val
        best_report = None
        best_lower = None
        # probe the largest scope first; otherwise binary-search the boundary
        report, bad = attempt(k_val, cap)
        if not bad:
            best_report, best_lower = report, cap
        elif cap > 0:
            lo, hi = 0, cap - 1
            while lo <= hi:
                mid = (lo + hi) // 2
                report, bad = attempt(k_val, mid)
                if not bad:
                    best_report, best_lower = report, mid
                    lo = mid + 1
                else:
                    hi = mid - 1
        if best_report is not None:
            return LocalExplainResult(best_report, k_val, best_lower, True, attempts)
        if k_val <= 1:
            break
    return LocalExplainResult(None, 1, 0, False, attempts)
