"""Dump a Program as LP-format text for cross-checking with external solvers."""
from __future__ import annotations

import math
import re

from .program import Program, Sense

_NAME_RE = re.compile(r"[^A-Za-z0-9_]")


def _var_names(program: Program) -> list[str]:
    names = []
    used = set()
    for i, info in enumerate(program.variables):
        base = _NAME_RE.sub("_", info.name) or f"x{i}"
        if base[0].isdigit():
            base = "v_" + base
        name = base
        k = 1
        while name in used:
            name = f"{base}_{k}"
            k += 1
        used.add(name)
        names.append(name)
    return names


def _expr_text(coeffs: dict[int, float], names: list[str]) -> str:
    parts = []
    for var in sorted(coeffs):
        coef = coeffs[var]
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        term = names[var] if mag == 1.0 else f"{mag:.12g} {names[var]}"
        if not parts and sign == "+":
            parts.append(term)
        else:
            parts.append(f"{sign} {term}")
    return " ".join(parts) if parts else "0 " + names[0]


def program_to_lp(program: Program) -> str:
    """CPLEX LP text: objective, constraints, bounds and binaries sections."""
    names = _var_names(program)
    lines = ["Minimize", f" obj: {_expr_text(program.objective.coeffs, names)}", "Subject To"]
    for i, con in enumerate(program.constraints):
        label = _NAME_RE.sub("_", con.name) or f"c{i}"
        op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[con.sense]
        lines.append(f" {label}_{i}: {_expr_text(con.expr.coeffs, names)} {op} {con.rhs:.12g}")
    lines.append("Bounds")
    for i, info in enumerate(program.variables):
        if info.is_binary:
            continue
        lo = "-inf" if info.lb == -math.inf else f"{info.lb:.12g}"
        hi = "+inf" if info.ub == math.inf else f"{info.ub:.12g}"
        lines.append(f" {lo} <= {names[i]} <= {hi}")
    binaries = program.binary_ids
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(names[i] for i in binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"
