"""Self-contained LP/MILP engine: programs, simplex, branch and bound."""
from .lpformat import program_to_lp
from .milp import solve_milp
from .program import (
    Constraint,
    LinearExpr,
    Program,
    Sense,
    Solution,
    SolverConfig,
    Status,
    add_abs_term,
    add_indicator_pair,
)
from .simplex import solve_lp

__all__ = [
    "Constraint",
    "LinearExpr",
    "Program",
    "Sense",
    "Solution",
    "SolverConfig",
    "Status",
    "add_abs_term",
    "add_indicator_pair",
    "program_to_lp",
    "solve_lp",
    "solve_milp",
]
