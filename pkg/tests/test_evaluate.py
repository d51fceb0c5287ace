"""Evaluation tests: position error, metrics, verification, escalation."""
import json

import numpy as np
import pytest

from rankfit.engine import SolverConfig
from rankfit.evaluate import (
    ExplanationReport,
    metrics,
    pairwise_penalty,
    position_error,
    solve_opt,
    solve_sat,
    solve_with_escalation,
    verify_report,
)
from rankfit.formulate import EpsilonConfig, ProblemSpec
from rankfit.model import (
    GivenRanking,
    Rel,
    Relation,
    TupleRecord,
    WeightVector,
    generate_uniform,
    ranking_from_weights,
)

from conftest import random_instance


def test_position_error_hand_scored(three_tuple_relation, three_tuple_ranking):
    # scores 2.8, 3.0, 2.3 swap the top two tuples: total error 2
    w = WeightVector((0.2, 0.7, 0.1))
    err = position_error(three_tuple_relation, three_tuple_ranking, w, 3)
    assert err.achieved == {"r": 2, "s": 1, "t": 3}
    assert err.total == pytest.approx(2.0)


def test_position_error_zero_for_reproducing_weights():
    rel, ranking, w = random_instance(2, n=15, m=3, k=5)
    assert position_error(rel, ranking, w, 5).total == 0.0


def test_position_error_importance_weighting(three_tuple_relation, three_tuple_ranking):
    w = WeightVector((0.2, 0.7, 0.1))
    err = position_error(three_tuple_relation, three_tuple_ranking, w, 3,
                         importance={"r": 2.0})
    assert err.per_tuple["r"] == pytest.approx(2.0)  # off by one, doubled
    assert err.total == pytest.approx(3.0)


def test_metrics_perfect_and_swapped():
    rel, ranking, w = random_instance(6, n=12, m=3, k=4)
    assert metrics(rel, ranking, w, 4) == {"inversions": 0, "max_position_error": 0}
    swapped = list(ranking.order)
    swapped[0], swapped[1] = swapped[1], swapped[0]
    ranking2 = GivenRanking(swapped, ranking.relations)
    out = metrics(rel, ranking2, w, 4)
    assert out == {"inversions": 1, "max_position_error": 1}


def test_metrics_match_bruteforce():
    rng = np.random.default_rng(8)
    rel, ranking, _ = random_instance(8, n=10, m=3, k=4, shuffle_swaps=3)
    w = WeightVector(tuple(rng.dirichlet(np.ones(3))))
    from rankfit.model import ranking_from_scores

    rho = ranking_from_scores(rel, w).rank_map()
    top = ranking.top_k_ids(4)
    expect = sum(
        1
        for r in top
        for s in rel.ids
        if ranking.rank_of(r) < ranking.rank_of(s) and rho[r] > rho[s]
    )
    out = metrics(rel, ranking, w, 4)
    assert out["inversions"] == expect
    assert out["max_position_error"] == max(abs(rho[r] - ranking.rank_of(r)) for r in top)


def test_pairwise_penalty_worked_example():
    # three tuples scored 1, 3, 2 against a ranking that wants them descending
    rel = Relation(["A"], [TupleRecord("a", (1.0,)), TupleRecord("b", (3.0,)),
                           TupleRecord("c", (2.0,))])
    ranking = GivenRanking(["a", "b", "c"], [Rel.GREATER, Rel.GREATER])
    penalty = pairwise_penalty(rel, ranking, WeightVector((1.0,)))
    assert penalty == pytest.approx((3 - 1) + (2 - 1))


def test_solve_sat_worked_instance(three_tuple_spec):
    for k in (2, 3):
        report = solve_sat(three_tuple_spec(k=k))
        assert report.status == "SATISFIABLE"
        assert report.verified
        w = report.weight_vector(("A1", "A2", "A3"))
        assert position_error_total(three_tuple_spec(k=k), w) == 0.0


def position_error_total(spec, w):
    return position_error(spec.relation, spec.ranking, w, spec.k, spec.importance).total


def test_solve_sat_unsatisfiable_reports_immediately(three_tuple_relation):
    # t always loses to s (dominated), so a ranking with t above s is hopeless
    ranking = GivenRanking(["t", "s", "r"], [Rel.GREATER, Rel.GREATER])
    spec = ProblemSpec(three_tuple_relation, ranking, 2)
    report = solve_with_escalation(spec, "sat")
    assert report.status == "UNSATISFIABLE"
    assert report.escalations == 0
    assert report.verified
    assert any("smaller eps1" in n for n in report.notes)


def test_solve_opt_worked_instance_zero(three_tuple_spec):
    report = solve_opt(three_tuple_spec(k=3))
    assert report.status == "OPTIMAL"
    assert report.objective == pytest.approx(0.0, abs=1e-9)
    assert report.total_error == 0.0
    assert report.verified


def test_opt_equals_score_derived_error(three_tuple_relation):
    # force nonzero optimum: rank the dominated tuple first
    ranking = GivenRanking(["t", "s", "r"], [Rel.GREATER, Rel.GREATER])
    spec = ProblemSpec(three_tuple_relation, ranking, 2)
    report = solve_opt(spec)
    assert report.status == "OPTIMAL"
    assert report.objective > 0
    assert report.verified  # solver objective equals recomputed error
    assert report.total_error == pytest.approx(report.objective, abs=1e-6)


def test_verify_rejects_perturbed_weights():
    # instance with a deliberately tight margin: perturbing flips one pair
    rel = Relation(
        ["A", "B"],
        [TupleRecord("a", (1.0, 0.0)), TupleRecord("b", (0.0, 1.0)),
         TupleRecord("c", (0.0, 0.0))],
    )
    ranking = GivenRanking(["a", "b", "c"], [Rel.GREATER, Rel.GREATER])
    spec = ProblemSpec(rel, ranking, 2)
    report = solve_sat(spec)
    assert report.verified
    # shift weight toward B until b overtakes a, keeping the report's claim stale
    w = report.weight_vector(rel.columns).as_array()
    w[1] += 1e-2 + w[0] - w[1]
    w[0] = 1 - w[1]
    report.weights = {c: v for c, v in zip(rel.columns, w)}
    assert not verify_report(report, spec)


def test_escalation_on_sloppy_engine_tolerance():
    # two tuples whose score gap is 1e-5 for every simplex weight
    rel = Relation(["A", "B"], [TupleRecord("hi", (1.0 + 1e-5, 2.0 + 1e-5)),
                                TupleRecord("lo", (1.0, 2.0))])
    ranking = GivenRanking(["hi", "lo"], [Rel.GREATER])
    eps = EpsilonConfig(tau=1e-4, eps1=2 * np.nextafter(1e-4, 1), max_escalations=4)
    spec = ProblemSpec(rel, ranking, 2, eps=eps)
    # an engine honoring tolerances loosely could accept the margin; the
    # verification step sees a tie at tau=1e-4 and the loop escalates to
    # infeasibility, which is the honest robust answer at that tolerance
    report = solve_with_escalation(spec, "sat", config=SolverConfig(feas_tol=1e-4))
    assert report.status in ("UNSATISFIABLE", "SATISFIABLE")
    if report.status == "SATISFIABLE":
        assert report.verified


def test_escalation_loop_retries_until_verified(monkeypatch):
    # drive the loop with a stubbed verifier that fails below a threshold
    rel, ranking, _ = random_instance(4, n=8, m=2, k=3)
    spec = ProblemSpec(rel, ranking, 3, eps=EpsilonConfig(eps1=1e-4))
    import rankfit.evaluate as ev

    real_verify = ev.verify_report
    calls = {"n": 0}

    def flaky_verify(report, s, eps=None):
        calls["n"] += 1
        if (eps or s.eps).eps1 < 1e-2:
            return False
        return real_verify(report, s, eps)

    monkeypatch.setattr(ev, "verify_report", flaky_verify)
    report = ev.solve_with_escalation(spec, "sat")
    assert report.escalations == 2  # 1e-4 -> 1e-3 -> 1e-2
    assert report.verified


def test_escalation_budget_exhausted_flagged(monkeypatch):
    rel, ranking, _ = random_instance(5, n=6, m=2, k=2)
    spec = ProblemSpec(rel, ranking, 2, eps=EpsilonConfig(eps1=1e-4, max_escalations=2))
    import rankfit.evaluate as ev

    monkeypatch.setattr(ev, "verify_report", lambda *a, **k: False)
    report = ev.solve_with_escalation(spec, "sat")
    assert not report.verified
    assert report.escalations == 2
    assert any("budget exhausted" in n for n in report.notes)


def test_verification_disabled_flags_unverified():
    rel, ranking, _ = random_instance(10, n=10, m=3, k=3)
    eps = EpsilonConfig(eps1=1e-10, enforce_floor=False)
    spec = ProblemSpec(rel, ranking, 3, eps=eps)
    report = solve_with_escalation(spec, "sat", verify=False)
    assert not report.verified
    assert any("verification disabled" in n for n in report.notes)


def test_report_json_roundtrip(three_tuple_spec):
    report = solve_sat(three_tuple_spec(k=2))
    data = json.loads(report.to_json())
    assert data["schema"] == 1
    assert data["status"] == "SATISFIABLE"
    back = ExplanationReport.from_dict(data)
    assert back.weights == report.weights
    assert back.total_error == report.total_error


def test_reports_deterministic_modulo_timestamp(three_tuple_spec):
    a = solve_sat(three_tuple_spec(k=3)).to_dict()
    b = solve_sat(three_tuple_spec(k=3)).to_dict()
    a.pop("timestamp")
    b.pop("timestamp")
    assert a == b


def test_max_objective_mode(three_tuple_relation):
    ranking = GivenRanking(["t", "s", "r"], [Rel.GREATER, Rel.GREATER])
    spec = ProblemSpec(three_tuple_relation, ranking, 2, objective="max")
    report = solve_opt(spec)
    assert report.status == "OPTIMAL"
    assert report.verified
    worst = max(row["error"] for row in report.per_tuple)
    assert report.objective == pytest.approx(worst, abs=1e-6)
