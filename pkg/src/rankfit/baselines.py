"""Competitor methods: least-squares fit, score-penalty LP, simplex sampling.

These serve both as comparison baselines and as seeders for the
cell-restricted search.  None of them solves the position-error problem
exactly; the score-penalty LP does decide exact reproducibility because its
constraint skeleton matches the feasibility program.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .engine import LinearExpr, Program, Sense, Solution, SolverConfig, Status, solve_lp
from .evaluate import position_error
from .formulate import EpsilonConfig, ProblemSpec
from .model import Rel, Relation, WeightVector


@dataclass(frozen=True)
class LinearRegressionFit:
    raw: tuple[float, ...]          # unconstrained least-squares coefficients
    projected: WeightVector         # clipped to >= 0 and renormalized
    intercept: float


def linear_regression_weights(relation: Relation, ranking) -> LinearRegressionFit:
    """Least-squares fit of the weighted sum to the negative given rank.

    The fit always uses all n tuples: a score-error objective cannot single
    out a top-k prefix, so k is effectively n here.  The raw coefficients are
    reported for transparency; the projection (negatives clipped, rescaled)
    is what seeding uses.
    """
    a = relation.attr_matrix()
    y = np.array([-ranking.rank_of(t) for t in relation.ids], dtype=float)
    x = np.hstack([a, np.ones((relation.n, 1))])
    # ridge with a tiny factor: well-defined even when the normal system is singular
    gram = x.T @ x + 1e-9 * np.eye(x.shape[1])
    theta = np.linalg.solve(gram, x.T @ y)
    raw = theta[:-1]
    clipped = np.clip(raw, 0.0, None)
    if clipped.sum() <= 0:
        projected = WeightVector.uniform(relation.m)
    else:
        projected = WeightVector.normalized(clipped)
    return LinearRegressionFit(tuple(raw), projected, float(theta[-1]))


@dataclass(frozen=True)
class OrdinalFit:
    weights: WeightVector
    penalty: float
    solution: Solution


def ordinal_regression_weights(spec: ProblemSpec, config: SolverConfig | None = None,
                               eps: EpsilonConfig | None = None) -> OrdinalFit:
    """Minimize total score-slack over the chain-plus-boundary pair set.

    Pairs mirror the feasibility program: adjacent top-k pairs (strict ones
    offset by eps1, ties penalized two-sidedly) and k-th-vs-lower boundary
    pairs.  Always feasible: slack variables absorb any violation, and the
    penalty is zero exactly when exact reproduction is possible.
    """
    eps = eps or spec.eps
    config = config or SolverConfig()
    p = Program("ordinal")
    wvars = {c: p.add_continuous(f"w[{c}]", 0.0, 1.0) for c in spec.relation.columns}
    p.add_constraint(LinearExpr({v: 1.0 for v in wvars.values()}), Sense.EQ, 1.0,
                     name="simplex", lazy=False)
    spec.predicate.add_rows(p, wvars)
    wlist = list(wvars.values())
    a = spec.relation.attr_matrix()
    order = spec.ranking.order
    idx = [spec.relation.index_of(t) for t in order]
    k, n = spec.k, spec.ranking.n
    objective = LinearExpr()

    def slack(name):
        xi = p.add_continuous(name, lb=0.0)
        objective.add_term(xi, 1.0)
        return xi

    for j in range(k - 1):
        diff = a[idx[j]] - a[idx[j + 1]]
        xi = slack(f"xi[{order[j]}|{order[j + 1]}]")
        expr = LinearExpr({v: d for v, d in zip(wlist, diff) if d != 0.0})
        expr.add_term(xi, 1.0)
        if spec.ranking.relations[j] is Rel.GREATER:
            p.add_constraint(expr, Sense.GE, eps.eps1, name=f"ord:{j}")
        else:
            # tie: penalize deviation on both sides
            p.add_constraint(expr, Sense.GE, 0.0, name=f"ord:{j}+")
            rev = LinearExpr({v: -d for v, d in zip(wlist, diff) if d != 0.0})
            rev.add_term(xi, 1.0)
            p.add_constraint(rev, Sense.GE, 0.0, name=f"ord:{j}-")
    kth = idx[k - 1]
    for j in range(k, n):
        diff = a[kth] - a[idx[j]]
        xi = slack(f"xi[b:{order[j]}]")
        expr = LinearExpr({v: d for v, d in zip(wlist, diff) if d != 0.0})
        expr.add_term(xi, 1.0)
        p.add_constraint(expr, Sense.GE, 0.0, name=f"ordb:{j}")
    p.set_objective(objective)
    sol = solve_lp(p, config)
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"score-penalty LP unexpectedly {sol.status.value}: {sol.message}")
    weights = WeightVector.normalized([sol.values[wvars[c]] for c in spec.relation.columns])
    return OrdinalFit(weights, float(sol.objective), sol)


@dataclass(frozen=True)
class SamplingResult:
    weights: WeightVector
    error: float
    evaluated: int


def sample_simplex(rng: np.random.Generator, m: int) -> np.ndarray:
    """Uniform point on the simplex via normalized exponential variates."""
    g = rng.exponential(1.0, size=m)
    return g / g.sum()


def sampling_search(spec: ProblemSpec, samples: int | None = None,
                    time_budget: float | None = None, seed: int = 0) -> SamplingResult:
    """Best-of-N random weight vectors by position error; deterministic per seed."""
    if samples is None and time_budget is None:
        raise ValueError("need a sample count or a time budget")
    if samples is not None and samples < 1:
        raise ValueError("budget must be > 0")
    rng = np.random.default_rng(seed)
    deadline = time.monotonic() + time_budget if time_budget else None
    best_w = None
    best_err = np.inf
    count = 0
    while True:
        if samples is not None and count >= samples:
            break
        if deadline is not None and time.monotonic() > deadline and count > 0:
            break
        w = WeightVector(tuple(sample_simplex(rng, spec.relation.m)))
        err = position_error(spec.relation, spec.ranking, w, spec.k, spec.importance).total
        count += 1
        if err < best_err:
            best_err = err
            best_w = w
        if best_err == 0.0 and samples is None:
            break
    return SamplingResult(best_w, float(best_err), count)
