"""Approximation tests: cells, sliding windows, local scope reduction."""
import numpy as np
import pytest

from rankfit.approx import (
    CellSpec,
    LocalExplainResult,
    cell_solve,
    default_exception,
    local_explain,
    seed_weights,
    sliding_window_solve,
)
from rankfit.engine import SolverConfig
from rankfit.evaluate import position_error, solve_opt
from rankfit.formulate import ProblemSpec
from rankfit.model import GivenRanking, WeightVector, generate_uniform, ranking_from_weights

from conftest import random_instance


def _spec(seed, n, m, k, swaps=0):
    rel, ranking, w = random_instance(seed, n=n, m=m, k=k, shuffle_swaps=swaps)
    return ProblemSpec(rel, ranking, k), w


def test_cell_covers_simplex_equals_unrestricted():
    spec, _ = _spec(21, n=12, m=3, k=3, swaps=2)
    full = solve_opt(spec)
    wide = cell_solve(spec, strategy="lr", cell_size=1.0)
    assert wide.status == "OPTIMAL"
    assert wide.objective == pytest.approx(full.objective, abs=1e-7)


def test_cell_error_at_most_seed_error():
    for seed in (1, 2, 3):
        spec, _ = _spec(seed, n=20, m=3, k=4, swaps=3)
        from rankfit.baselines import ordinal_regression_weights

        fit = ordinal_regression_weights(spec)
        seed_err = position_error(spec.relation, spec.ranking, fit.weights, spec.k).total
        report = cell_solve(spec, strategy="ordreg", cell_size=0.01)
        assert report.status == "OPTIMAL"
        assert report.objective <= seed_err + 1e-9
        assert report.context["cell"]["seed_error"] == pytest.approx(seed_err)


def test_nested_cells_monotone():
    spec, _ = _spec(5, n=40, m=3, k=5, swaps=6)
    center = seed_weights(spec, "ordreg")
    small = cell_solve(spec, strategy="explicit", weights=center, cell_size=0.001)
    large = cell_solve(spec, strategy="explicit", weights=center, cell_size=0.01)
    assert small.status == "OPTIMAL" and large.status == "OPTIMAL"
    assert large.objective <= small.objective + 1e-9


def test_cell_spec_validation():
    with pytest.raises(ValueError):
        CellSpec(WeightVector.uniform(2), 0.0)
    bounds = CellSpec(WeightVector((0.995, 0.005)), 0.01).bounds(["a", "b"])
    assert bounds["a"][1] == 1.0 and bounds["b"][0] == 0.0


def test_window_single_covers_whole_problem():
    spec, _ = _spec(11, n=6, m=2, k=6)
    out = sliding_window_solve(spec, 6)
    assert len(out.reports) == 1
    full = solve_opt(spec)
    assert out.reports[0].objective == pytest.approx(full.objective, abs=1e-7)


def test_windows_zero_error_on_generated_ranking():
    rel = generate_uniform(12, 3, seed=31)
    rng = np.random.default_rng(31)
    w = WeightVector(tuple(rng.dirichlet(np.ones(3))))
    ranking = ranking_from_weights(rel, w)
    spec = ProblemSpec(rel, ranking, 6)
    out = sliding_window_solve(spec, 4)
    assert all(r.objective == pytest.approx(0.0, abs=1e-9) for r in out.reports)
    vals = np.array(out.seed.values)
    assert np.all(vals >= 0) and vals.sum() == pytest.approx(1.0)


def test_window_size_validated():
    spec, _ = _spec(1, n=10, m=2, k=3)
    with pytest.raises(ValueError):
        sliding_window_solve(spec, 4)  # exceeds k


def test_local_explain_clean_problem_returns_original():
    spec, _ = _spec(14, n=10, m=3, k=3)
    out = local_explain(spec)
    assert out.succeeded
    assert out.k_used == 3 and out.n_lower == 7
    assert out.solves == 1
    assert out.report.objective == pytest.approx(0.0, abs=1e-9)


def test_local_explain_shrinks_on_exception():
    # treat any nonzero error as an exception; the full instance has swaps at
    # the top, so only smaller k or fewer lower-ranked tuples solve cleanly
    spec, _ = _spec(3, n=14, m=2, k=6, swaps=4)
    base = solve_opt(spec)
    assert base.objective > 0
    out = local_explain(spec, exception=lambda r: r.status != "OPTIMAL" or r.total_error > 0)
    if out.succeeded:
        assert out.report.total_error == 0.0
        assert out.k_used <= 6


def test_local_explain_binary_search_matches_linear_scan():
    # monotone exception in the number of lower-ranked tuples
    spec, _ = _spec(17, n=12, m=2, k=4, swaps=2)
    threshold = {"limit": 4}

    def exception(report):
        # exception iff the subproblem kept more than `limit` lower tuples
        return report.context["local_n_lower"] > threshold["limit"]

    import rankfit.approx as approx_mod

    orig = approx_mod.solve_opt_detailed

    def tagged(spec_inner, *a, **kw):
        report, layout, sol = orig(spec_inner, *a, **kw)
        report.context["local_n_lower"] = spec_inner.relation.n - spec_inner.k
        return report, layout, sol

    approx_mod.solve_opt_detailed = tagged
    try:
        out = local_explain(spec, exception=exception)
    finally:
        approx_mod.solve_opt_detailed = orig
    assert out.succeeded
    # binary search must land exactly on the linear-scan boundary
    assert out.n_lower == threshold["limit"]
    # and use logarithmically many solves at that k level
    assert out.solves <= 2 + int(np.ceil(np.log2(max(2, spec.relation.n)))) + 1


def test_local_explain_failure_reported():
    spec, _ = _spec(19, n=8, m=2, k=2)
    out = local_explain(spec, exception=lambda r: True)
    assert not out.succeeded
    assert out.report is None
