"""Dense-tableau bounded-variable simplex with lazy rows and warm starts.

The solver works on ``min c.y  s.t.  A y <= b (or = b),  0 <= y <= U`` after
canonicalizing variable bounds.  Two pivoting modes share one tableau:

* primal two-phase simplex for cold starts, with a Bland's-rule fallback once
  degenerate pivots stall;
* dual simplex for warm starts, used when re-solving after bound changes
  (branch and bound) or after activating lazy rows, both of which preserve
  dual feasibility of the previous optimal basis.

Column ids are global and stable: structural variables first, then one slack
per constraint row, then one artificial per row.  A basis snapshot (basis ids
plus the nonbasic-at-upper set) therefore transfers between solves that share
the same Program.

Inequality rows marked lazy join the tableau only when violated, keeping it
small: instances built here have few variables or few binding rows, but may
carry hundreds of thousands of constraint rows.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .program import Program, Sense, Solution, SolverConfig, Status

_PIV_TOL = 1e-7
_DUAL_TOL = 1e-9
_RATIO_TIE = 1e-9
_REFRESH_EVERY = 400


class NumericalBreakdown(Exception):
    pass


@dataclass
class _Canonical:
    """Program snapshot: rows normalized to <= / =, every variable lb = 0."""

    a_rows: np.ndarray          # (nrows, nstruct)
    b: np.ndarray
    is_eq: np.ndarray           # bool per row
    lazy: np.ndarray            # bool per row
    c: np.ndarray
    c_offset: float
    upper: np.ndarray           # structural upper bounds (inf allowed)
    var_map: list               # ("shift", lb, col) | ("mirror", ub, col) | ("split", c+, c-)
    row_names: list


@dataclass(frozen=True)
class BasisSnapshot:
    basis: tuple                # one global column id per active row, row-aligned
    at_upper: frozenset         # global ids of nonbasic columns parked at their upper bound
    active_rows: tuple


def canonicalize(program: Program, bound_overrides=None) -> _Canonical:
    lb, ub = program.bounds_arrays()
    if bound_overrides:
        for var, (lo, hi) in bound_overrides.items():
            lb[var], ub[var] = lo, hi
            if lo > hi:
                raise ValueError("empty override bound range")
    var_map = []
    ncanon = 0
    for j in range(program.num_vars):
        if lb[j] > -math.inf:
            var_map.append(("shift", lb[j], ncanon))
            ncanon += 1
        elif ub[j] < math.inf:
            var_map.append(("mirror", ub[j], ncanon))
            ncanon += 1
        else:
            var_map.append(("split", ncanon, ncanon + 1))
            ncanon += 2

    nrows = len(program.constraints)
    a = np.zeros((nrows, ncanon))
    b = np.zeros(nrows)
    is_eq = np.zeros(nrows, dtype=bool)
    lazy = np.zeros(nrows, dtype=bool)
    row_names = []
    for i, con in enumerate(program.constraints):
        sign = -1.0 if con.sense is Sense.GE else 1.0
        shift = 0.0
        for v, coef in con.expr.coeffs.items():
            sc = coef * sign
            entry = var_map[v]
            if entry[0] == "shift":
                a[i, entry[2]] += sc
                shift += sc * entry[1]
            elif entry[0] == "mirror":
                a[i, entry[2]] -= sc
                shift += sc * entry[1]
            else:
                a[i, entry[1]] += sc
                a[i, entry[2]] -= sc
        b[i] = con.rhs * sign - shift
        is_eq[i] = con.sense is Sense.EQ
        lazy[i] = con.lazy and con.sense is not Sense.EQ
        row_names.append(con.name or f"row:{i}")

    c = np.zeros(ncanon)
    c_offset = program.objective.constant
    cvec, _ = program.objective_array()
    for j in range(program.num_vars):
        coef = cvec[j]
        if coef == 0.0:
            continue
        entry = var_map[j]
        if entry[0] == "shift":
            c[entry[2]] += coef
            c_offset += coef * entry[1]
        elif entry[0] == "mirror":
            c[entry[2]] -= coef
            c_offset += coef * entry[1]
        else:
            c[entry[1]] += coef
            c[entry[2]] -= coef

    upper = np.empty(ncanon)
    for j in range(program.num_vars):
        entry = var_map[j]
        if entry[0] == "shift":
            upper[entry[2]] = ub[j] - lb[j]
        elif entry[0] == "mirror":
            upper[entry[2]] = math.inf
        else:
            upper[entry[1]] = math.inf
            upper[entry[2]] = math.inf
    return _Canonical(a, b, is_eq, lazy, c, c_offset, upper, var_map, row_names)


def apply_bound_overrides(canon: _Canonical, overrides: dict) -> _Canonical:
    """Re-bound shift-mapped variables without copying the coefficient matrix."""
    cols = []
    deltas = []
    var_map = list(canon.var_map)
    upper = canon.upper.copy()
    c_offset = canon.c_offset
    for var, (lo, hi) in overrides.items():
        entry = canon.var_map[var]
        if entry[0] != "shift":
            raise ValueError("override fast path requires a finite original lower bound")
        col = entry[2]
        delta = lo - entry[1]
        cols.append(col)
        deltas.append(delta)
        upper[col] = hi - lo
        var_map[var] = ("shift", lo, col)
        c_offset += canon.c[col] * delta
    b = canon.b.copy()
    if cols:
        b -= canon.a_rows[:, cols] @ np.array(deltas)
    return _Canonical(canon.a_rows, b, canon.is_eq, canon.lazy, canon.c,
                      c_offset, upper, var_map, canon.row_names)


def map_back(canon: _Canonical, y: np.ndarray) -> np.ndarray:
    x = np.zeros(len(canon.var_map))
    for j, entry in enumerate(canon.var_map):
        if entry[0] == "shift":
            x[j] = y[entry[2]] + entry[1]
        elif entry[0] == "mirror":
            x[j] = entry[1] - y[entry[2]]
        else:
            x[j] = y[entry[1]] - y[entry[2]]
    return x


def _map_ray_back(canon: _Canonical, ray: np.ndarray) -> np.ndarray:
    d = np.zeros(len(canon.var_map))
    for j, entry in enumerate(canon.var_map):
        if entry[0] == "shift":
            d[j] = ray[entry[2]]
        elif entry[0] == "mirror":
            d[j] = -ray[entry[2]]
        else:
            d[j] = ray[entry[1]] - ray[entry[2]]
    return d


class _Result:
    __slots__ = ("status", "y", "obj", "ray", "dual_bound", "snapshot", "message")

    def __init__(self, status, y=None, obj=None, ray=None, dual_bound=None,
                 snapshot=None, message=""):
        self.status = status
        self.y = y
        self.obj = obj
        self.ray = ray
        self.dual_bound = dual_bound
        self.snapshot = snapshot
        self.message = message


class _Tableau:
    """Simplex state over an active row subset with global-stable column ids.

    Global id layout: [0, p) structural, [p, p+R) slack of row i, [p+2R) area
    for artificials of row i (id p+R+i).  Slacks of equality rows are pinned
    to [0, 0]; artificials exist only while a cold start needs them.
    """

    def __init__(self, canon: _Canonical, active: np.ndarray, config: SolverConfig,
                 deadline, iteration_budget=None):
        self.canon = canon
        self.active = np.asarray(active, dtype=int)
        self.config = config
        self.deadline = deadline
        self.nrows = len(self.active)
        self.p = canon.a_rows.shape[1]
        self.big_r = len(canon.b)
        self.iterations = 0
        self.iteration_budget = iteration_budget
        self.bland = False
        self.degenerate_streak = 0
        self.pivots_since_refresh = 0

        self.b = canon.b[self.active].copy()
        self.row_of = {int(r): i for i, r in enumerate(self.active)}

        # local column set: structural + slack per active row (+ arts on demand)
        self.cols = list(range(self.p)) + [self.p + int(r) for r in self.active]
        self.col_pos = {g: i for i, g in enumerate(self.cols)}
        self.art_pos_start = len(self.cols)

        a_local = np.zeros((self.nrows, len(self.cols)))
        a_local[:, : self.p] = canon.a_rows[self.active]
        for i in range(self.nrows):
            a_local[i, self.p + i] = 1.0
        self.a_local = a_local

        self.upper = np.empty(len(self.cols))
        self.upper[: self.p] = canon.upper
        for i, r in enumerate(self.active):
            self.upper[self.p + i] = 0.0 if canon.is_eq[r] else math.inf

        self.c_struct = canon.c
        self.basis = None            # local column positions, row-aligned
        self.at_upper = None         # bool per local column
        self.x = None
        self.tab = None

    # -- column helpers ----------------------------------------------------

    def global_id(self, pos: int) -> int:
        return self.cols[pos]

    def is_artificial(self, pos: int) -> bool:
        return self.cols[pos] >= self.p + self.big_r

    def add_artificial(self, row: int, sign: float) -> int:
        # sign is encoded in the global id so warm restarts rebuild it exactly
        gid = self.p + (1 if sign > 0 else 2) * self.big_r + int(self.active[row])
        col = np.zeros((self.nrows, 1))
        col[row, 0] = sign
        self.a_local = np.hstack([self.a_local, col])
        self.cols.append(gid)
        self.col_pos[gid] = len(self.cols) - 1
        self.upper = np.append(self.upper, math.inf)
        return len(self.cols) - 1

    def costs(self, phase: int) -> np.ndarray:
        c = np.zeros(len(self.cols))
        if phase == 1:
            for pos in range(self.art_pos_start, len(self.cols)):
                c[pos] = 1.0
        else:
            c[: self.p] = self.c_struct
        return c

    # -- state maintenance ---------------------------------------------------

    def refresh(self):
        bmat = self.a_local[:, self.basis]
        try:
            self.tab = np.linalg.solve(bmat, self.a_local)
            nb_ub = np.array([pos for pos in range(len(self.cols))
                              if not self.in_basis[pos] and self.at_upper[pos]], dtype=int)
            rhs = self.b.copy()
            if len(nb_ub):
                rhs -= self.a_local[:, nb_ub] @ self.upper[nb_ub]
            xb = np.linalg.solve(bmat, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"singular basis: {exc}") from exc
        self.x = np.where(self.at_upper, self.upper, 0.0)
        self.x[~np.isfinite(self.x)] = 0.0
        self.x[self.basis] = xb
        self.pivots_since_refresh = 0

    @property
    def in_basis(self):
        mask = np.zeros(len(self.cols), dtype=bool)
        mask[self.basis] = True
        return mask

    def set_basis(self, basis_positions, at_upper_positions):
        self.basis = np.asarray(basis_positions, dtype=int)
        self.at_upper = np.zeros(len(self.cols), dtype=bool)
        self.at_upper[list(at_upper_positions)] = True
        self.at_upper[self.basis] = False
        self.refresh()

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        return c - c[self.basis] @ self.tab

    def duals(self, c: np.ndarray) -> np.ndarray:
        bmat = self.a_local[:, self.basis]
        try:
            return np.linalg.solve(bmat.T, c[self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"singular basis: {exc}") from exc

    def snapshot(self) -> BasisSnapshot:
        basis_g = tuple(self.cols[pos] for pos in self.basis)
        ups = frozenset(self.cols[pos] for pos in np.flatnonzero(self.at_upper)
                        if not self.in_basis[pos])
        return BasisSnapshot(basis_g, ups, tuple(int(r) for r in self.active))

    def _budget_exceeded(self) -> bool:
        if self.iteration_budget is not None and self.iterations >= self.iteration_budget:
            return True
        return (self.deadline is not None and self.iterations % 64 == 0
                and time.monotonic() > self.deadline)

    # -- primal simplex -------------------------------------------------------

    def primal(self, c: np.ndarray, exclude_arts: bool = False):
        """Primal iterations to optimality; returns (d, ray, timed_out)."""
        d = self.reduced_costs(c)
        while True:
            if self.iterations >= self.config.max_lp_iterations:
                raise NumericalBreakdown("LP iteration limit exceeded")
            if self._budget_exceeded():
                return d, None, True
            q = self._primal_entering(d, exclude_arts)
            if q < 0:
                return d, None, False
            self.iterations += 1
            ray = self._primal_step(q, d, c)
            if ray is not None:
                return d, ray, False
            if self.pivots_since_refresh >= _REFRESH_EVERY:
                self.refresh()
                d = self.reduced_costs(c)

    def _primal_entering(self, d, exclude_arts: bool) -> int:
        in_b = self.in_basis
        free = ~in_b & (self.upper > 0)
        if exclude_arts and self.art_pos_start < len(self.cols):
            free[self.art_pos_start:] = False
        lower_ok = free & ~self.at_upper & (d < -_DUAL_TOL)
        upper_ok = free & self.at_upper & (d > _DUAL_TOL)
        eligible = lower_ok | upper_ok
        if not eligible.any():
            return -1
        if self.bland:
            return int(np.flatnonzero(eligible)[0])
        score = np.where(lower_ok, -d, np.where(upper_ok, d, -math.inf))
        return int(np.argmax(score))

    def _primal_step(self, q, d, c):
        sigma = -1.0 if self.at_upper[q] else 1.0
        col = self.tab[:, q]
        alpha = sigma * col
        xb = self.x[self.basis]
        ub_b = self.upper[self.basis]

        t = np.full(self.nrows, math.inf)
        dec = alpha > _PIV_TOL
        t[dec] = np.maximum(xb[dec], 0.0) / alpha[dec]
        inc = (alpha < -_PIV_TOL) & np.isfinite(ub_b)
        t[inc] = np.maximum(ub_b[inc] - xb[inc], 0.0) / (-alpha[inc])

        t_rows = t.min() if self.nrows else math.inf
        t_enter = self.upper[q]

        if t_rows == math.inf and t_enter == math.inf:
            ray = np.zeros(len(self.cols))
            ray[q] = sigma
            ray[self.basis] = -sigma * col
            return ray

        if t_enter <= t_rows:
            step = t_enter
            self.x[q] += sigma * step
            self.x[self.basis] = xb - sigma * step * col
            self.at_upper[q] = not self.at_upper[q]
            self.degenerate_streak = 0
            return None

        step = t_rows
        cands = np.flatnonzero(t <= step * (1 + _RATIO_TIE) + 1e-14)
        if self.bland:
            r = int(cands[np.argmin(self.basis[cands])])
        else:
            r = int(cands[np.argmax(np.abs(alpha[cands]))])
        self._pivot(r, q, step, sigma, col, d, c)
        if step <= 1e-12:
            self.degenerate_streak += 1
            if self.degenerate_streak > 40 + self.nrows and not self.bland:
                self.bland = True
        else:
            self.degenerate_streak = 0
        return None

    def _pivot(self, r, q, step, sigma, col, d, c):
        leaving = self.basis[r]
        self.x[q] += sigma * step
        self.x[self.basis] -= sigma * step * col
        if sigma * col[r] > 0:
            self.x[leaving] = 0.0
            self.at_upper[leaving] = False
        else:
            self.x[leaving] = self.upper[leaving]
            self.at_upper[leaving] = True
        piv = self.tab[r, q]
        if abs(piv) < 1e-11:
            raise NumericalBreakdown("pivot element vanished")
        prow = self.tab[r] / piv
        colv = self.tab[:, q].copy()
        self.tab -= np.outer(colv, prow)
        self.tab[r] = prow
        if d is not None:
            d -= d[q] * prow
        self.at_upper[q] = False
        self.basis[r] = q
        self.x[q] = max(self.x[q], 0.0)
        self.pivots_since_refresh += 1

    # -- dual simplex ----------------------------------------------------------

    def dual(self, c: np.ndarray):
        """Dual iterations from a dual-feasible basis; returns (status, timed_out).

        status: "optimal" once primal-feasible, "infeasible" when a violated row
        admits no entering column (primal infeasibility certified).
        """
        d = self.reduced_costs(c)
        tol = max(self.config.feas_tol, 1e-11)
        while True:
            if self.iterations >= self.config.max_lp_iterations:
                raise NumericalBreakdown("LP iteration limit exceeded")
            if self._budget_exceeded():
                return "timeout", True
            xb = self.x[self.basis]
            ub_b = self.upper[self.basis]
            below = -xb
            above = xb - ub_b
            viol = np.maximum(below, np.where(np.isfinite(ub_b), above, -math.inf))
            r = int(np.argmax(viol))
            if viol[r] <= tol:
                return "optimal", False
            self.iterations += 1
            leaving_low = below[r] >= above[r] if np.isfinite(ub_b[r]) else True
            row = self.tab[r]
            in_b = self.in_basis
            if leaving_low:
                # basic below lb: need row value to increase
                elig_lb = ~in_b & ~self.at_upper & (row < -_PIV_TOL) & (self.upper > 0)
                elig_ub = ~in_b & self.at_upper & (row > _PIV_TOL)
            else:
                elig_lb = ~in_b & ~self.at_upper & (row > _PIV_TOL) & (self.upper > 0)
                elig_ub = ~in_b & self.at_upper & (row < -_PIV_TOL)
            elig = elig_lb | elig_ub
            if self.art_pos_start < len(self.cols):
                elig[self.art_pos_start:] = False
            idx = np.flatnonzero(elig)
            if len(idx) == 0:
                return "infeasible", False
            # ratio test on reduced costs to preserve dual feasibility
            dvals = self.reduced_costs(c)[idx]
            ratios = np.abs(dvals) / np.abs(row[idx])
            best = ratios.min()
            cands = idx[np.flatnonzero(ratios <= best * (1 + _RATIO_TIE) + 1e-14)]
            if self.bland:
                q = int(cands.min())
            else:
                q = int(cands[np.argmax(np.abs(row[cands]))])
            gap = self.x[self.basis[r]] - (0.0 if leaving_low else self.upper[self.basis[r]])
            self._dual_pivot(r, q, c)
            if abs(gap) <= 1e-12:
                self.degenerate_streak += 1
                if self.degenerate_streak > 40 + self.nrows and not self.bland:
                    self.bland = True
            else:
                self.degenerate_streak = 0
            if self.pivots_since_refresh >= _REFRESH_EVERY:
                self.refresh()

    def _dual_pivot(self, r, q, c):
        leaving = self.basis[r]
        piv = self.tab[r, q]
        if abs(piv) < 1e-11:
            raise NumericalBreakdown("dual pivot element vanished")
        # leaving variable snaps to the bound it violated
        xb_r = self.x[leaving]
        if xb_r < 0 or not np.isfinite(self.upper[leaving]):
            target = 0.0
        else:
            target = self.upper[leaving] if xb_r > self.upper[leaving] else 0.0
        # entering value change: from its current bound
        q_start = self.upper[q] if self.at_upper[q] else 0.0
        delta_q = (xb_r - target) / piv
        prow = self.tab[r] / piv
        colv = self.tab[:, q].copy()
        # update primal values: x_q moves by delta_q, basics adjust
        self.x[self.basis] = self.x[self.basis] - delta_q * colv
        self.x[q] = q_start + delta_q
        self.x[leaving] = target
        self.at_upper[leaving] = bool(np.isfinite(self.upper[leaving])
                                      and target == self.upper[leaving]
                                      and self.upper[leaving] > 0)
        self.tab -= np.outer(colv, prow)
        self.tab[r] = prow
        self.at_upper[q] = False
        self.basis[r] = q
        self.pivots_since_refresh += 1


def _build_cold_basis(tab: _Tableau):
    """Slack basis where possible, artificials elsewhere; b is not sign-normalized,
    so rows with negative rhs or equality rows get a signed artificial."""
    basis = []
    at_upper = []
    for i in range(tab.nrows):
        r = int(tab.active[i])
        slack_pos = tab.col_pos[tab.p + r]
        if not tab.canon.is_eq[r] and tab.b[i] >= 0:
            basis.append(slack_pos)
        else:
            sign = 1.0 if tab.b[i] >= 0 else -1.0
            basis.append(tab.add_artificial(i, sign))
    tab.set_basis(basis, at_upper)


def _phase1(tab: _Tableau):
    c1 = tab.costs(1)
    d, ray, timed_out = tab.primal(c1)
    if timed_out:
        return "timeout"
    if ray is not None:
        raise NumericalBreakdown("phase-1 problem reported unbounded")
    infeas = float(c1 @ np.maximum(tab.x, 0.0))
    if infeas > tab.config.feas_tol:
        return "infeasible"
    # pin artificials and pivot basic ones out where possible
    if tab.art_pos_start < len(tab.cols):
        for i in range(tab.nrows):
            pos = tab.basis[i]
            if pos < tab.art_pos_start:
                continue
            row = tab.tab[i]
            choices = [p for p in range(tab.art_pos_start)
                       if not tab.in_basis[p] and abs(row[p]) > 1e-7 and tab.upper[p] > 0]
            if choices:
                best = max(choices, key=lambda p: abs(row[p]))
                tab._pivot(i, best, 0.0, 1.0, tab.tab[:, best].copy(), None, None)
        for pos in range(tab.art_pos_start, len(tab.cols)):
            tab.upper[pos] = 0.0
        tab.x[tab.art_pos_start:] = np.where(tab.in_basis[tab.art_pos_start:],
                                             tab.x[tab.art_pos_start:], 0.0)
    return "feasible"


def _try_warm(tab: _Tableau, warm: BasisSnapshot):
    """Dual-simplex restart from a previous basis; None when unusable."""
    basis_positions = []
    used = set()
    # rows carried over keep their basic column; new rows enter on their slack
    carried = {}
    for g, r in zip(warm.basis, warm.active_rows):
        carried[int(r)] = g
    for i, r in enumerate(tab.active):
        g = carried.get(int(r))
        if g is None:
            g = tab.p + int(r)  # fresh row: its slack starts basic
        if g not in tab.col_pos:
            if g >= tab.p + tab.big_r:
                # pinned artificial from a previous solve: recreate it
                sign = -1.0 if g >= tab.p + 2 * tab.big_r else 1.0
                row_idx = g - tab.p - tab.big_r
                if sign < 0:
                    row_idx -= tab.big_r
                pos = tab.add_artificial(tab.row_of[int(row_idx)], sign)
                tab.upper[pos] = 0.0
                basis_positions.append(pos)
                used.add(pos)
                continue
            return None
        pos = tab.col_pos[g]
        if pos in used:
            return None
        basis_positions.append(pos)
        used.add(pos)
    ups = [tab.col_pos[g] for g in warm.at_upper
           if g in tab.col_pos and tab.col_pos[g] not in used
           and np.isfinite(tab.upper[tab.col_pos[g]]) and tab.upper[tab.col_pos[g]] > 0]
    try:
        c2 = tab.costs(2)
        tab.set_basis(basis_positions, ups)
        status, timed_out = tab.dual(c2)
        if timed_out:
            return "timeout"
        if status == "infeasible":
            return "infeasible"
        # dual simplex may finish with reduced-cost noise: polish with primal
        d, ray, timed_out = tab.primal(c2, exclude_arts=True)
        if timed_out:
            return "timeout"
        if ray is not None:
            return "unbounded", ray
        return "optimal"
    except NumericalBreakdown:
        return None


def _solve_cold(tab: _Tableau):
    _build_cold_basis(tab)
    state = _phase1(tab)
    if state != "feasible":
        return state
    c2 = tab.costs(2)
    d, ray, timed_out = tab.primal(c2, exclude_arts=True)
    if timed_out:
        return "timeout"
    if ray is not None:
        return "unbounded", ray
    return "optimal"


def _run_active(canon, rows, config, deadline, iteration_budget, warm):
    """Solve the active-row LP warm when possible, cold otherwise."""
    iters = 0
    if warm is not None:
        tab = _Tableau(canon, rows, config, deadline, iteration_budget)
        outcome = _try_warm(tab, warm)
        iters += tab.iterations
        if outcome is not None:
            return outcome, tab, iters
    tab = _Tableau(canon, rows, config, deadline, iteration_budget)
    outcome = _solve_cold(tab)
    iters += tab.iterations
    return outcome, tab, iters


def _dual_bound(tab: _Tableau) -> float:
    c2 = tab.costs(2)
    duals = tab.duals(c2)
    red = c2 - duals @ tab.a_local
    bound = float(duals @ tab.b)
    neg = red < -1e-9
    if np.any(neg & ~np.isfinite(tab.upper)):
        return -math.inf
    return bound + float((red[neg] * tab.upper[neg]).sum())


def _violations(canon: _Canonical, y: np.ndarray) -> np.ndarray:
    lhs = canon.a_rows @ y
    viol = lhs - canon.b
    viol[canon.is_eq] = np.abs(viol[canon.is_eq])
    return viol


def _all_rows_satisfied(canon: _Canonical, y: np.ndarray, feas_tol: float) -> bool:
    return not np.any(_violations(canon, y) > feas_tol)


def solve_lp_ext(program: Program, config: SolverConfig | None = None,
                 bound_overrides=None, active_rows=None, canon: _Canonical | None = None,
                 deadline=None, warm: BasisSnapshot | None = None,
                 iteration_budget=None):
    """Row-generation LP solve; returns (Solution, active rows, canon, snapshot).

    ``canon`` may be passed to reuse the dense snapshot across repeated solves
    of the same Program (branch and bound); ``warm`` restarts from a previous
    basis via the dual simplex.
    """
    config = config or SolverConfig()
    program.seal()
    if canon is None:
        canon = canonicalize(program, bound_overrides)
    elif bound_overrides:
        try:
            canon = apply_bound_overrides(canon, bound_overrides)
        except ValueError:
            canon = canonicalize(program, bound_overrides)
    nrows = len(canon.b)

    always_on = set(np.flatnonzero(~canon.lazy).tolist())
    if active_rows is not None:
        active_set = set(int(r) for r in active_rows) | always_on
    elif nrows <= config.lazy_row_threshold:
        active_set = set(range(nrows))
    else:
        active_set = set(always_on)
    if warm is not None:
        active_set |= set(warm.active_rows)

    total_iters = 0
    batch = max(64, 2 * canon.a_rows.shape[1])
    snapshot = warm
    tab = None
    for _round in range(nrows + 2):
        if config.cancel_event is not None and getattr(config.cancel_event, "is_set", lambda: False)():
            return (Solution(Status.TIMEOUT_BEST, message="cancelled", iterations=total_iters),
                    sorted(active_set), canon, snapshot)
        rows = np.array(sorted(active_set), dtype=int)
        try:
            outcome, tab, iters = _run_active(canon, rows, config, deadline,
                                              iteration_budget, snapshot)
        except NumericalBreakdown as exc:
            return (Solution(Status.NUMERIC, message=str(exc), iterations=total_iters),
                    sorted(active_set), canon, None)
        total_iters += iters

        if outcome == "infeasible":
            return (Solution(Status.INFEASIBLE, iterations=total_iters,
                             message="infeasible"), sorted(active_set), canon, None)
        if outcome == "timeout":
            sol = Solution(Status.TIMEOUT_BEST, iterations=total_iters, message="LP time limit")
            y = tab.x[: tab.p] if tab.x is not None else None
            if y is not None and _all_rows_satisfied(canon, y, config.feas_tol):
                x = map_back(canon, y)
                sol.values = {j: float(v) for j, v in enumerate(x)}
                sol.objective = float(canon.c @ y) + canon.c_offset
            return sol, sorted(active_set), canon, None
        if isinstance(outcome, tuple) and outcome[0] == "unbounded":
            ray_local = outcome[1]
            ray = ray_local[: tab.p]
            lhs_dir = canon.a_rows @ ray
            grow = (~canon.is_eq) & (lhs_dir > 1e-9)
            grow[sorted(active_set)] = False
            if not grow.any():
                x = map_back(canon, tab.x[: tab.p])
                sol = Solution(Status.UNBOUNDED, iterations=total_iters)
                sol.values = {j: float(v) for j, v in enumerate(x)}
                return sol, sorted(active_set), canon, None
            new_rows = np.flatnonzero(grow)
            active_set.update(new_rows.tolist())
            snapshot = tab.snapshot()
            continue

        # optimal on the active subset: scan lazy rows for violations
        y = tab.x[: tab.p]
        viol = _violations(canon, y)
        viol[sorted(active_set)] = 0.0
        violated = np.flatnonzero(viol > 0.5 * config.feas_tol)
        if violated.size == 0:
            x = map_back(canon, y)
            obj = float(canon.c @ y) + canon.c_offset
            sol = Solution(Status.OPTIMAL, objective=obj,
                           values={j: float(v) for j, v in enumerate(x)},
                           iterations=total_iters)
            try:
                sol.dual_bound = _dual_bound(tab) + canon.c_offset
            except NumericalBreakdown:
                sol.dual_bound = None
            sol.best_bound = obj
            return sol, sorted(active_set), canon, tab.snapshot()
        order = violated[np.argsort(-viol[violated], kind="stable")]
        active_set.update(order[:batch].tolist())
        snapshot = tab.snapshot()

    return (Solution(Status.NUMERIC, message="row generation failed to converge",
                     iterations=total_iters), sorted(active_set), canon, None)


def verify_assignment(program: Program, values: dict[int, float], feas_tol: float) -> list[str]:
    """Independent feasibility re-check straight from the Constraint objects."""
    return program.check_assignment(values, feas_tol)


def solve_lp(program: Program, config: SolverConfig | None = None) -> Solution:
    """Solve a continuous program; statuses: OPTIMAL / INFEASIBLE / UNBOUNDED / NUMERIC.

    Every OPTIMAL answer is re-verified against the original constraints; a
    failed re-check is downgraded to NUMERIC rather than reported as optimal.
    """
    config = config or SolverConfig()
    if program.binary_ids:
        raise ValueError("program has binary variables; use solve_milp")
    deadline = time.monotonic() + config.time_limit if config.time_limit else None
    sol, _active, _canon, _snap = solve_lp_ext(program, config, deadline=deadline)
    if sol.status is Status.OPTIMAL:
        bad = verify_assignment(program, sol.values, config.feas_tol)
        if bad:
            return Solution(Status.NUMERIC, iterations=sol.iterations,
                            message=f"re-verification failed: {bad[:5]}")
    return sol
