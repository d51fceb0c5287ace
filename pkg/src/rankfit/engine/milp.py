"""Branch and bound over binary variables with LP-relaxation bounds.

Best-bound node order with deterministic tie-breaks.  Child LPs warm-start
from the parent basis via the dual simplex, so probing both directions of a
candidate is cheap; the default rule probes unreliable candidates (strong
branching), records per-variable pseudocosts, and fixes a variable inside the
node whenever one probe direction is infeasible.  ``most-fractional`` is
available as a plain rule for comparison.

When the caller certifies an objective granularity g (every integer-feasible
point has objective a multiple of g), node bounds are rounded up to the next
multiple before pruning, which closes unit-cost instances far earlier.
"""
from __future__ import annotations

import heapq
import math
import time

import numpy as np

from .program import Program, Solution, SolverConfig, Status
from .simplex import canonicalize, solve_lp_ext, verify_assignment

_PC_EPS = 1e-6


class _Pseudocosts:
    def __init__(self):
        self.sums = {}   # var -> [down_sum, down_n, up_sum, up_n]

    def record(self, var, direction, frac, gain):
        entry = self.sums.setdefault(var, [0.0, 0, 0.0, 0])
        dist = frac if direction == 0 else (1.0 - frac)
        if dist <= 1e-9:
            return
        if direction == 0:
            entry[0] += gain / dist
            entry[1] += 1
        else:
            entry[2] += gain / dist
            entry[3] += 1

    def reliability(self, var) -> int:
        entry = self.sums.get(var)
        if entry is None:
            return 0
        return min(entry[1], entry[3])

    def score(self, var, frac) -> float:
        entry = self.sums.get(var)
        if entry is None:
            return 0.0
        down = (entry[0] / entry[1]) * frac if entry[1] else 0.0
        up = (entry[2] / entry[3]) * (1.0 - frac) if entry[3] else 0.0
        return max(down, _PC_EPS) * max(up, _PC_EPS)


def _granularity(program: Program, config: SolverConfig) -> float:
    return config.objective_granularity or program.objective_granularity or 0.0


def _values_array(program: Program, values: dict[int, float]) -> np.ndarray:
    x = np.zeros(program.num_vars)
    for j, v in values.items():
        x[j] = v
    return x


def solve_milp(program: Program, config: SolverConfig | None = None) -> Solution:
    """Exact optimum when run to completion; incumbent + bound gap on timeout."""
    config = config or SolverConfig()
    program.seal()
    binaries = sorted(program.binary_ids)
    deadline = time.monotonic() + config.time_limit if config.time_limit else None

    if not binaries:
        sol, _, _, _ = solve_lp_ext(program, config, deadline=deadline)
        if sol.status is Status.OPTIMAL:
            bad = verify_assignment(program, sol.values, config.feas_tol)
            if bad:
                return Solution(Status.NUMERIC, message=f"re-verification failed: {bad[:5]}")
        return sol

    gran = _granularity(program, config)

    def eff(bound: float) -> float:
        if gran > 0:
            return math.ceil((bound - 1e-9) / gran) * gran
        return bound

    canon = canonicalize(program)
    cvec, coffset = program.objective_array()

    incumbent_vals: dict[int, float] | None = None
    incumbent_obj = math.inf
    nodes = 0
    iters = 0
    seq = 0
    heap: list = []
    pseudo = _Pseudocosts()

    def cancelled() -> bool:
        ev = config.cancel_event
        return ev is not None and getattr(ev, "is_set", lambda: False)()

    def out_of_budget() -> bool:
        if deadline is not None and time.monotonic() > deadline:
            return True
        if config.node_limit is not None and nodes >= config.node_limit:
            return True
        return cancelled()

    def try_incumbent(values: dict[int, float]) -> None:
        """Validate a candidate integer-feasible assignment and keep the best."""
        nonlocal incumbent_vals, incumbent_obj
        for j in binaries:
            if abs(values[j] - round(values[j])) > config.int_tol:
                return
        x = _values_array(program, values)
        obj = float(cvec @ x) + coffset
        if obj >= incumbent_obj - 1e-12:
            return
        if verify_assignment(program, values, max(config.feas_tol, 1e-9)):
            return
        incumbent_vals = dict(values)
        incumbent_obj = obj

    def solve_node(fixed: dict[int, int], active, warm):
        nonlocal iters
        overrides = {j: (float(v), float(v)) for j, v in fixed.items()}
        sol, new_active, _, snap = solve_lp_ext(
            program, config, bound_overrides=overrides, active_rows=active,
            canon=canon, deadline=deadline, warm=warm)
        iters += sol.iterations
        return sol, new_active, snap

    if config.initial_incumbent is not None:
        try_incumbent(dict(config.initial_incumbent))

    root_sol, root_active, root_snap = solve_node({}, None, None)
    if root_sol.status in (Status.INFEASIBLE, Status.UNBOUNDED, Status.NUMERIC):
        return Solution(root_sol.status, iterations=iters, message=root_sol.message)
    if root_sol.status is Status.TIMEOUT_BEST:
        sol = Solution(Status.TIMEOUT_BEST, iterations=iters, best_bound=-math.inf,
                       message="time limit at root relaxation")
        if incumbent_vals is not None:
            sol.objective, sol.values = incumbent_obj, incumbent_vals
        return sol

    seq += 1
    heapq.heappush(heap, (root_sol.objective, seq, {}, root_active, root_snap,
                          root_sol.values))

    strong = config.branching == "reliability"
    timed_out = False
    current_bound = None
    while heap:
        if out_of_budget():
            timed_out = True
            break
        bound, _, fixed, active, snap, values = heapq.heappop(heap)
        current_bound = bound
        if eff(bound) >= incumbent_obj - 1e-9:
            current_bound = None
            continue
        nodes += 1

        # node loop: probing may fix variables and re-solve in place
        while True:
            frac = [(j, values[j]) for j in binaries
                    if j not in fixed and abs(values[j] - round(values[j])) > config.int_tol]
            if not frac:
                full_fix = dict(fixed)
                for j in binaries:
                    full_fix[j] = int(round(values[j]))
                sol, _, _ = solve_node(full_fix, active, snap)
                if sol.status is Status.OPTIMAL:
                    try_incumbent(sol.values)
                elif sol.status is Status.NUMERIC:
                    return Solution(Status.NUMERIC, nodes=nodes, iterations=iters,
                                    message=sol.message)
                elif sol.status is Status.TIMEOUT_BEST:
                    timed_out = True
                current_bound = None
                break

            if config.heuristic is not None:
                guess = config.heuristic(program, values)
                if guess is not None:
                    try_incumbent(guess)
                    if eff(bound) >= incumbent_obj - 1e-9:
                        current_bound = None
                        break

            # choose candidates to probe
            if strong:
                ranked = sorted(
                    frac,
                    key=lambda jf: (pseudo.reliability(jf[0]) >= 2,
                                    -pseudo.score(jf[0], jf[1]),
                                    -min(jf[1], 1 - jf[1]), jf[0]))
                unreliable = [jf for jf in ranked if pseudo.reliability(jf[0]) < 2]
                probe_list = unreliable[:6] if unreliable else ranked[:1]
            else:
                scores = [min(v - math.floor(v), math.ceil(v) - v) for _, v in frac]
                probe_list = [frac[int(np.argmax(scores))]]

            best_var = None
            best_children = None
            best_score = -math.inf
            fixed_inplace = False
            for j, fval in probe_list:
                children = {}
                for direction in (0, 1):
                    child_fixed = dict(fixed)
                    child_fixed[j] = direction
                    sol, child_active, child_snap = solve_node(child_fixed, active, snap)
                    children[direction] = (sol, child_active, child_snap)
                    if sol.status is Status.TIMEOUT_BEST:
                        timed_out = True
                        break
                    if sol.status in (Status.NUMERIC, Status.UNBOUNDED):
                        return Solution(sol.status, nodes=nodes, iterations=iters,
                                        message=sol.message)
                    if sol.status is Status.OPTIMAL:
                        pseudo.record(j, direction, fval, max(0.0, sol.objective - bound))
                if timed_out:
                    break
                down, up = children[0][0], children[1][0]
                down_dead = (down.status is Status.INFEASIBLE
                             or (down.status is Status.OPTIMAL
                                 and eff(down.objective) >= incumbent_obj - 1e-9))
                up_dead = (up.status is Status.INFEASIBLE
                           or (up.status is Status.OPTIMAL
                               and eff(up.objective) >= incumbent_obj - 1e-9))
                if down_dead and up_dead:
                    fixed_inplace = True
                    current_bound = None
                    break
                if down_dead or up_dead:
                    # one side is dead: pin the variable and continue this node
                    direction = 0 if up_dead else 1
                    sol, child_active, child_snap = children[direction]
                    fixed = dict(fixed)
                    fixed[j] = direction
                    active, snap, values = child_active, child_snap, sol.values
                    bound = max(bound, sol.objective)
                    fixed_inplace = True
                    break
                gain_d = max(down.objective - bound, 0.0)
                gain_u = max(up.objective - bound, 0.0)
                score = max(gain_d, _PC_EPS) * max(gain_u, _PC_EPS)
                if score > best_score:
                    best_score = score
                    best_var = j
                    best_children = children
            if timed_out:
                break
            if fixed_inplace:
                if current_bound is None:
                    break  # node fully pruned
                continue

            if best_var is None:
                current_bound = None
                break
            for direction in (0, 1):
                sol, child_active, child_snap = best_children[direction]
                child_fixed = dict(fixed)
                child_fixed[best_var] = direction
                seq += 1
                heapq.heappush(heap, (sol.objective, seq, child_fixed, child_active,
                                      child_snap, sol.values))
            current_bound = None
            break
        if timed_out:
            break

    if timed_out or heap:
        open_bounds = [eff(entry[0]) for entry in heap]
        if current_bound is not None:
            open_bounds.append(eff(current_bound))
        best_bound = min(open_bounds) if open_bounds else incumbent_obj
        best_bound = min(best_bound, incumbent_obj)
        sol = Solution(Status.TIMEOUT_BEST, nodes=nodes, iterations=iters,
                       best_bound=best_bound, message="budget exhausted")
        if incumbent_vals is not None:
            sol.objective = incumbent_obj
            sol.values = incumbent_vals
        return sol

    if incumbent_vals is None:
        return Solution(Status.INFEASIBLE, nodes=nodes, iterations=iters,
                        message="search exhausted without integer-feasible point")
    return Solution(Status.OPTIMAL, objective=incumbent_obj, values=incumbent_vals,
                    best_bound=incumbent_obj, nodes=nodes, iterations=iters)
