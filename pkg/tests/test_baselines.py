"""Baseline tests: least-squares fit, score-penalty LP, simplex sampling."""
import numpy as np
import pytest

from rankfit.baselines import (
    linear_regression_weights,
    ordinal_regression_weights,
    sample_simplex,
    sampling_search,
)
from rankfit.evaluate import position_error, solve_sat
from rankfit.formulate import ProblemSpec
from rankfit.model import (
    GivenRanking,
    Rel,
    Relation,
    TupleRecord,
    WeightVector,
    build_unsat_ranking,
    generate_uniform,
    ranking_from_weights,
)

from conftest import random_instance


def _evenly_spaced_instance(seed, n=40, m=4):
    """Relation whose true scores under a planted weight vector are evenly spaced."""
    rng = np.random.default_rng(seed)
    w_true = rng.dirichlet(np.ones(m))
    # build attributes whose weighted sum is exactly i/n, plus free directions
    a = rng.random((n, m))
    scores = a @ w_true
    target = np.linspace(1.0, 0.0, n)
    # shift each row along w_true to hit the target score exactly
    a = a + np.outer((target - scores) / (w_true @ w_true), w_true)
    rel = Relation([f"A{i}" for i in range(m)],
                   [TupleRecord(f"t{i}", tuple(row)) for i, row in enumerate(a)])
    ranking = ranking_from_weights(rel, WeightVector(tuple(w_true)))
    return rel, ranking, w_true


def test_lr_recovers_planted_direction():
    rel, ranking, w_true = _evenly_spaced_instance(0)
    fit = linear_regression_weights(rel, ranking)
    raw = np.array(fit.raw)
    cos = raw @ w_true / (np.linalg.norm(raw) * np.linalg.norm(w_true))
    assert cos > 0.99


def test_lr_single_attribute_projects_to_unit():
    rel = generate_uniform(10, 1, seed=4)
    ranking = ranking_from_weights(rel, WeightVector((1.0,)))
    fit = linear_regression_weights(rel, ranking)
    assert fit.projected.values == (1.0,)


def test_lr_projection_on_simplex():
    rel, ranking, _ = random_instance(3, n=25, m=4, k=5, shuffle_swaps=5)
    fit = linear_regression_weights(rel, ranking)
    vals = np.array(fit.projected.values)
    assert np.all(vals >= 0)
    assert vals.sum() == pytest.approx(1.0)


def test_ordinal_zero_penalty_iff_satisfiable():
    # satisfiable: ranking generated by a weight vector
    rel, ranking, _ = random_instance(12, n=20, m=3, k=5)
    spec = ProblemSpec(rel, ranking, 5)
    fit = ordinal_regression_weights(spec)
    assert fit.penalty == pytest.approx(0.0, abs=1e-9)
    # and its certificate reproduces the top-k (scores tau-close count as tied)
    err = position_error(rel, ranking, fit.weights, 5, tie_tol=spec.eps.tau)
    assert err.total == 0.0
    # matches the exact feasibility answer
    assert solve_sat(spec).status == "SATISFIABLE"


def test_ordinal_positive_penalty_on_unsat_construction():
    rel = generate_uniform(30, 3, seed=42)
    ranking = build_unsat_ranking(rel)
    spec = ProblemSpec(rel, ranking, 5)
    fit = ordinal_regression_weights(spec)
    assert fit.penalty > 1e-9
    assert solve_sat(spec).status == "UNSATISFIABLE"


def test_ordinal_respects_ties():
    rel = Relation(["A", "B"], [TupleRecord("a", (1.0, 0.0)),
                                TupleRecord("b", (0.0, 1.0)),
                                TupleRecord("c", (0.2, 0.2))])
    ranking = GivenRanking(["a", "b", "c"], [Rel.EQUAL, Rel.GREATER])
    spec = ProblemSpec(rel, ranking, 3)
    fit = ordinal_regression_weights(spec)
    assert fit.penalty == pytest.approx(0.0, abs=1e-9)
    s = rel.attr_matrix() @ fit.weights.as_array()
    assert abs(s[0] - s[1]) <= 1e-9  # tie honored exactly


def test_sample_simplex_uniform_properties():
    rng = np.random.default_rng(0)
    pts = np.array([sample_simplex(rng, 3) for _ in range(2000)])
    assert np.allclose(pts.sum(axis=1), 1.0)
    assert np.all(pts >= 0)
    assert np.all(np.abs(pts.mean(axis=0) - 1 / 3) < 0.02)


def test_sampling_deterministic_and_monotone():
    rel, ranking, _ = random_instance(9, n=15, m=3, k=4, shuffle_swaps=4)
    spec = ProblemSpec(rel, ranking, 4)
    a = sampling_search(spec, samples=100, seed=7)
    b = sampling_search(spec, samples=100, seed=7)
    assert a.weights.values == b.weights.values and a.error == b.error
    big = sampling_search(spec, samples=1000, seed=7)
    assert big.error <= a.error
    one = sampling_search(spec, samples=1, seed=7)
    assert one.evaluated == 1


def test_sampling_finds_zero_on_generous_instance(three_tuple_relation, three_tuple_ranking):
    spec = ProblemSpec(three_tuple_relation, three_tuple_ranking, 3)
    out = sampling_search(spec, samples=10000, seed=0)
    assert out.error == 0.0


def test_sampling_needs_budget():
    rel, ranking, _ = random_instance(1, n=5, m=2, k=2)
    spec = ProblemSpec(rel, ranking, 2)
    with pytest.raises(ValueError):
        sampling_search(spec)
