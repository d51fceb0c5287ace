"""Program-building layer of the LP/MILP engine: expressions, constraints, models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"
    TIMEOUT_BEST = "TIMEOUT_BEST"
    NUMERIC = "NUMERIC"


class LinearExpr:
    """Sparse linear expression: coefficient map over variable ids plus a constant."""

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs=None, constant: float = 0.0):
        self.coeffs: dict[int, float] = {}
        if coeffs:
            for var, coef in coeffs.items():
                if coef != 0.0:
                    self.coeffs[int(var)] = float(coef)
        self.constant = float(constant)

    @classmethod
    def constant_term(cls, value: float) -> "LinearExpr":
        return cls({}, value)

    @classmethod
    def term(cls, var: int, coef: float = 1.0) -> "LinearExpr":
        return cls({var: coef})

    def add_term(self, var: int, coef: float) -> "LinearExpr":
        new = self.coeffs.get(var, 0.0) + coef
        if new == 0.0:
            self.coeffs.pop(var, None)
        else:
            self.coeffs[var] = new
        return self

    def scaled(self, factor: float) -> "LinearExpr":
        return LinearExpr({v: c * factor for v, c in self.coeffs.items()}, self.constant * factor)

    def negated(self) -> "LinearExpr":
        return self.scaled(-1.0)

    def plus(self, other: "LinearExpr") -> "LinearExpr":
        out = LinearExpr(dict(self.coeffs), self.constant + other.constant)
        for v, c in other.coeffs.items():
            out.add_term(v, c)
        return out

    def value(self, assignment) -> float:
        return self.constant + sum(c * assignment[v] for v, c in self.coeffs.items())

    def __repr__(self):
        return f"LinearExpr({self.coeffs}, {self.constant})"


@dataclass(frozen=True)
class Constraint:
    """Non-strict linear constraint ``expr sense rhs``.

    Strict inequalities are rejected: they define open feasible sets, so the
    caller must eliminate them (e.g. via a positive margin) before reaching
    the engine.
    """

    expr: LinearExpr
    sense: Sense
    rhs: float
    name: str = ""
    lazy: bool = True

    def violation(self, assignment) -> float:
        lhs = self.expr.value(assignment)
        if self.sense is Sense.LE:
            return lhs - self.rhs
        if self.sense is Sense.GE:
            return self.rhs - lhs
        return abs(lhs - self.rhs)


@dataclass
class _VarInfo:
    name: str
    lb: float
    ub: float
    is_binary: bool


@dataclass
class Solution:
    """Outcome of a solve: status, objective, assignment, bound and counters."""

    status: Status
    objective: float | None = None
    values: dict[int, float] | None = None
    best_bound: float | None = None
    dual_bound: float | None = None
    nodes: int = 0
    iterations: int = 0
    message: str = ""

    @property
    def is_feasible(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.TIMEOUT_BEST) and self.values is not None


@dataclass(frozen=True)
class SolverConfig:
    """Engine knobs; all tolerances must be positive.

    ``objective_granularity`` is a caller-certified value g such that every
    integer-feasible point has objective a multiple of g; 0 disables the
    resulting bound rounding.  ``threads`` is accepted for interface
    stability; the engine itself is deterministic and single-threaded.
    """

    feas_tol: float = 1e-9
    int_tol: float = 1e-6
    time_limit: float | None = None
    node_limit: int | None = None
    branching: str = "reliability"
    seed: int = 0
    objective_granularity: float = 0.0
    lazy_row_threshold: int = 400
    max_lp_iterations: int = 200_000
    threads: int = 1
    cancel_event: object = None
    heuristic: object = None
    initial_incumbent: object = None

    def __post_init__(self):
        if self.feas_tol <= 0 or self.int_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if self.branching not in ("reliability", "most-fractional"):
            raise ValueError(f"unknown branching rule {self.branching!r}")


class Program:
    """A linear or mixed-binary program: bounded variables, constraints, objective.

    The objective is always minimized.  A program seals itself on first solve;
    further mutation raises.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: list[_VarInfo] = []
        self.constraints: list[Constraint] = []
        self.objective = LinearExpr()
        self.objective_granularity = 0.0
        self._sealed = False

    # -- construction -----------------------------------------------------

    def _check_mutable(self):
        if self._sealed:
            raise RuntimeError("program is sealed; build a new one instead of mutating")

    def add_continuous(self, name: str, lb: float = 0.0, ub: float = math.inf) -> int:
        self._check_mutable()
        if not lb <= ub:
            raise ValueError(f"variable {name!r} has empty bound range [{lb}, {ub}]")
        self.variables.append(_VarInfo(name, float(lb), float(ub), False))
        return len(self.variables) - 1

    def add_binary(self, name: str) -> int:
        self._check_mutable()
        self.variables.append(_VarInfo(name, 0.0, 1.0, True))
        return len(self.variables) - 1

    def add_constraint(self, expr: LinearExpr, sense: Sense, rhs: float = 0.0,
                       name: str = "", lazy: bool = True) -> Constraint:
        self._check_mutable()
        sense = Sense(sense)
        self._check_vars(expr)
        # fold the expression constant into the rhs
        con = Constraint(LinearExpr(expr.coeffs), sense, float(rhs) - expr.constant, name, lazy)
        self.constraints.append(con)
        return con

    def set_objective(self, expr: LinearExpr):
        self._check_mutable()
        self._check_vars(expr)
        self.objective = expr

    def add_objective_term(self, var: int, coef: float):
        self._check_mutable()
        self.objective.add_term(var, coef)

    def set_bounds(self, var: int, lb: float, ub: float):
        self._check_mutable()
        if not lb <= ub:
            raise ValueError("empty bound range")
        info = self.variables[var]
        info.lb, info.ub = float(lb), float(ub)

    def _check_vars(self, expr: LinearExpr):
        for v in expr.coeffs:
            if not 0 <= v < len(self.variables):
                raise ValueError(f"expression references undeclared variable {v}")

    def seal(self):
        self._sealed = True

    # -- derived helpers ---------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def binary_ids(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_binary]

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def dense_rows(self) -> tuple[np.ndarray, np.ndarray, list[Sense]]:
        """Dense (rows, rhs, senses) snapshot of all constraints."""
        nrows = len(self.constraints)
        a = np.zeros((nrows, self.num_vars))
        b = np.zeros(nrows)
        senses = []
        for i, con in enumerate(self.constraints):
            for v, c in con.expr.coeffs.items():
                a[i, v] = c
            b[i] = con.rhs
            senses.append(con.sense)
        return a, b, senses

    def objective_array(self) -> tuple[np.ndarray, float]:
        c = np.zeros(self.num_vars)
        for v, coef in self.objective.coeffs.items():
            c[v] = coef
        return c, self.objective.constant

    def check_assignment(self, values, feas_tol: float) -> list[str]:
        """Names/indices of constraints or bounds violated beyond feas_tol."""
        bad = []
        for i, info in enumerate(self.variables):
            x = values[i]
            if x < info.lb - feas_tol or x > info.ub + feas_tol:
                bad.append(f"bound:{info.name}")
        for i, con in enumerate(self.constraints):
            if con.violation(values) > feas_tol:
                bad.append(con.name or f"row:{i}")
        return bad


def add_abs_term(program: Program, expr: LinearExpr, weight: float = 1.0, name: str = "abs") -> int:
    """Add e >= expr, e >= -expr and weight*e to the objective; returns e's id.

    At any optimum with weight > 0 the fresh variable equals |expr|.
    """
    if weight < 0:
        raise ValueError("abs-term weight must be >= 0")
    e = program.add_continuous(name, lb=0.0)
    pos = expr.negated()
    pos.add_term(e, 1.0)
    program.add_constraint(pos, Sense.GE, 0.0, name=f"{name}+", lazy=False)
    neg = LinearExpr(dict(expr.coeffs), expr.constant)
    neg.add_term(e, 1.0)
    program.add_constraint(neg, Sense.GE, 0.0, name=f"{name}-", lazy=False)
    program.add_objective_term(e, weight)
    return e


def add_indicator_pair(program: Program, delta: int, expr: LinearExpr,
                       eps1: float, eps2: float, big_m: float, name: str = "ind"):
    """Wire binary ``delta`` to ``expr`` through a big-M pair:

        delta = 1  =>  expr >= eps1
        delta = 0  =>  expr <= eps2

    ``big_m`` must dominate max(|eps1|, |eps2|) plus the largest magnitude
    ``expr`` can take over the feasible region; the engine cannot detect an
    undersized M.
    """
    if not program.variables[delta].is_binary:
        raise ValueError("delta must be a binary variable")
    if big_m <= 0:
        raise ValueError("big_m must be > 0")
    # expr + M*(1-delta) >= eps1  <=>  expr - M*delta >= eps1 - M... rearranged below
    lo = LinearExpr(dict(expr.coeffs), 0.0)
    lo.add_term(delta, -big_m)
    program.add_constraint(lo, Sense.GE, eps1 - big_m - expr.constant, name=f"{name}:on")
    hi = LinearExpr(dict(expr.coeffs), 0.0)
    hi.add_term(delta, -big_m)
    program.add_constraint(hi, Sense.LE, eps2 - expr.constant, name=f"{name}:off")
