"""MILP engine tests: branch and bound vs exhaustive enumeration."""
import itertools
import math

import numpy as np
import pytest

from rankfit.engine import (
    LinearExpr,
    Program,
    Sense,
    SolverConfig,
    Status,
    add_abs_term,
    add_indicator_pair,
    solve_lp,
    solve_milp,
)


def _enumerate_optimum(program, binaries):
    """Oracle: solve the LP for every 0/1 assignment of the binaries."""
    best = math.inf
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        clone = _clone_with_fixed(program, dict(zip(binaries, bits)))
        sol = solve_lp(clone)
        if sol.status is Status.OPTIMAL and sol.objective < best:
            best = sol.objective
    return best


def _clone_with_fixed(program, fixed):
    clone = Program()
    for i, info in enumerate(program.variables):
        if i in fixed:
            clone.add_continuous(info.name, fixed[i], fixed[i])
        elif info.is_binary:
            clone.add_continuous(info.name, 0.0, 1.0)
        else:
            clone.add_continuous(info.name, info.lb, info.ub)
    for con in program.constraints:
        clone.add_constraint(LinearExpr(dict(con.expr.coeffs)), con.sense, con.rhs, con.name)
    clone.set_objective(LinearExpr(dict(program.objective.coeffs), program.objective.constant))
    return clone


def _random_milp(rng, n_bin, n_cont, n_rows):
    p = Program()
    bs = [p.add_binary(f"b{i}") for i in range(n_bin)]
    xs = [p.add_continuous(f"x{i}", 0.0, 2.0) for i in range(n_cont)]
    allv = bs + xs
    for _ in range(n_rows):
        coefs = rng.normal(size=len(allv))
        rhs = float(rng.uniform(0.5, len(allv)))
        p.add_constraint(LinearExpr({v: c for v, c in zip(allv, coefs)}), Sense.LE, rhs)
    cvec = rng.normal(size=len(allv))
    p.set_objective(LinearExpr({v: c for v, c in zip(allv, cvec)}))
    return p, bs


def test_integral_relaxation_single_node():
    # binary appears with cost 1 and lower bound pressure, relaxation lands at 0
    p = Program()
    b = p.add_binary("b")
    x = p.add_continuous("x", 0.0, 1.0)
    p.add_constraint(LinearExpr({b: 1.0, x: 1.0}), Sense.GE, 1.0)
    p.set_objective(LinearExpr({b: 2.0, x: 1.0}))
    sol = solve_milp(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0)
    assert sol.nodes == 1


def test_six_binary_instance_matches_enumeration():
    rng = np.random.default_rng(11)
    p, bs = _random_milp(rng, 6, 2, 5)
    sol = solve_milp(p)
    oracle = _enumerate_optimum(p, bs)
    if math.isinf(oracle):
        assert sol.status is Status.INFEASIBLE
    else:
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(oracle, abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_bnb_matches_enumeration_up_to_12_binaries(seed):
    rng = np.random.default_rng(200 + seed)
    n_bin = int(rng.integers(3, 13))
    p, bs = _random_milp(rng, n_bin, int(rng.integers(0, 3)), int(rng.integers(2, 8)))
    sol = solve_milp(p)
    oracle = _enumerate_optimum(p, bs)
    if math.isinf(oracle):
        assert sol.status is Status.INFEASIBLE
    else:
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(oracle, abs=1e-7)
        # reported assignment must satisfy every constraint
        assert not p.check_assignment(sol.values, 1e-7)


def test_deterministic_objective_across_runs():
    rng = np.random.default_rng(5)
    p1, _ = _random_milp(rng, 8, 2, 6)
    rng = np.random.default_rng(5)
    p2, _ = _random_milp(rng, 8, 2, 6)
    s1 = solve_milp(p1)
    s2 = solve_milp(p2)
    assert s1.status == s2.status
    if s1.status is Status.OPTIMAL:
        assert s1.objective == s2.objective
        assert s1.nodes == s2.nodes


def test_indicator_pair_implication_table():
    # enumerate delta on a one-variable program and check the implications
    for forced in (0, 1):
        p = Program()
        x = p.add_continuous("x", 0.0, 1.0)
        d = p.add_binary("d")
        expr = LinearExpr({x: 1.0}, -0.5)  # expr = x - 0.5 in [-0.5, 0.5]
        add_indicator_pair(p, d, expr, eps1=0.2, eps2=0.0, big_m=1.0)
        p.add_constraint(LinearExpr({d: 1.0}), Sense.EQ, float(forced))
        p.set_objective(LinearExpr({x: 1.0}))
        sol = solve_milp(p)
        assert sol.status is Status.OPTIMAL
        xval = sol.values[x]
        if forced == 1:
            assert xval - 0.5 >= 0.2 - 1e-8
        else:
            assert xval - 0.5 <= 0.0 + 1e-8


def test_indicator_pair_tied_expression_allows_zero():
    p = Program()
    x = p.add_continuous("x", 0.5, 0.5)
    d = p.add_binary("d")
    add_indicator_pair(p, d, LinearExpr({x: 1.0}, -0.5), eps1=0.2, eps2=0.0, big_m=1.0)
    p.add_constraint(LinearExpr({d: 1.0}), Sense.EQ, 0.0)
    sol = solve_milp(p)
    assert sol.status is Status.OPTIMAL


def test_indicator_pair_fixed_at_eps1_requires_delta_one():
    p = Program()
    x = p.add_continuous("x", 0.2, 0.2)  # expr fixed at eps1
    d = p.add_binary("d")
    add_indicator_pair(p, d, LinearExpr({x: 1.0}), eps1=0.2, eps2=0.1, big_m=1.0)
    p.add_constraint(LinearExpr({d: 1.0}), Sense.EQ, 1.0)
    assert solve_milp(p).status is Status.OPTIMAL
    p2 = Program()
    x2 = p2.add_continuous("x", 0.2, 0.2)
    d2 = p2.add_binary("d")
    add_indicator_pair(p2, d2, LinearExpr({x2: 1.0}), eps1=0.2, eps2=0.1, big_m=1.0)
    p2.add_constraint(LinearExpr({d2: 1.0}), Sense.EQ, 0.0)
    assert solve_milp(p2).status is Status.INFEASIBLE


def test_abs_reformulation_in_milp_objective():
    # minimize |2b - 1|: optimum 1 at either binary value
    p = Program()
    b = p.add_binary("b")
    add_abs_term(p, LinearExpr({b: 2.0}, -1.0), weight=1.0)
    sol = solve_milp(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_granularity_rounding_preserves_optimum():
    rng = np.random.default_rng(77)
    p = Program()
    bs = [p.add_binary(f"b{i}") for i in range(8)]
    x = p.add_continuous("x", 0.0, 4.0)
    for _ in range(5):
        coefs = rng.normal(size=9)
        p.add_constraint(LinearExpr({v: c for v, c in zip(bs + [x], coefs)}), Sense.LE,
                         float(rng.uniform(1, 5)))
    # objective with integer coefficients on binaries only
    p.set_objective(LinearExpr({v: float(rng.integers(1, 4)) for v in bs}))
    base = solve_milp(p)
    p2 = _clone_with_fixed(p, {})
    # rebuild with binaries declared binary again
    p2 = Program()
    bs2 = [p2.add_binary(f"b{i}") for i in range(8)]
    x2 = p2.add_continuous("x", 0.0, 4.0)
    for con in p.constraints:
        p2.add_constraint(LinearExpr(dict(con.expr.coeffs)), con.sense, con.rhs)
    p2.set_objective(LinearExpr(dict(p.objective.coeffs)))
    p2.objective_granularity = 1.0
    fast = solve_milp(p2)
    assert base.status == fast.status
    if base.status is Status.OPTIMAL:
        assert fast.objective == pytest.approx(base.objective, abs=1e-7)


def test_timeout_returns_incumbent():
    rng = np.random.default_rng(42)
    p, _ = _random_milp(rng, 14, 3, 10)
    sol = solve_milp(p, SolverConfig(node_limit=3))
    assert sol.status in (Status.TIMEOUT_BEST, Status.OPTIMAL, Status.INFEASIBLE)
    if sol.status is Status.TIMEOUT_BEST and sol.values is not None:
        assert not p.check_assignment(sol.values, 1e-7)
        assert sol.best_bound is not None
