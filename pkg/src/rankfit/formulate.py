"""Translate ranking-explanation problems into engine programs.

Builders are pure functions of immutable inputs: the feasibility program for
exact top-k reproduction (a chain of n-1 score comparisons), and the
minimum-position-error program driven by beat indicators with dominance
pruning, per-pair certified big-M values, and user weight predicates.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .engine import LinearExpr, Program, Sense, add_abs_term, add_indicator_pair
from .model import GivenRanking, Rel, Relation, WeightVector


@dataclass(frozen=True)
class EpsilonConfig:
    """Thresholds that keep strict/tied score relations robust to solver tolerance.

    ``eps1`` is the margin enforced for a strict beat, ``eps2`` the ceiling for
    a non-beat (0 so that ties stay representable).  Separating beat from
    non-beat requires eps1 - eps2 > 2*tau; ``floor()`` is the smallest eps1
    honoring that with eps2 = 0.  ``enforce_floor=False`` bypasses validation
    for deliberate robustness studies.
    """

    tau: float = 1e-9
    eps1: float = 1e-4
    eps2: float = 0.0
    escalation_factor: float = 10.0
    max_escalations: int = 6
    enforce_floor: bool = True

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.escalation_factor <= 1:
            raise ValueError("escalation factor must be > 1")
        if self.max_escalations < 0:
            raise ValueError("max_escalations must be >= 0")
        if self.enforce_floor:
            if self.eps1 < self.floor:
                raise ValueError(f"eps1={self.eps1} below floor {self.floor}")
            if self.eps1 - self.eps2 <= 2 * self.tau:
                raise ValueError("need eps1 - eps2 > 2*tau")

    @property
    def floor(self) -> float:
        return 2 * np.nextafter(self.tau, math.inf)

    def with_eps1(self, eps1: float) -> "EpsilonConfig":
        return EpsilonConfig(self.tau, eps1, self.eps2, self.escalation_factor,
                             self.max_escalations, self.enforce_floor)

    def escalated(self) -> "EpsilonConfig":
        return self.with_eps1(self.eps1 * self.escalation_factor)


# ---------------------------------------------------------------------------
# Weight predicates


@dataclass(frozen=True)
class PredicateConstraint:
    coeffs: tuple[tuple[str, float], ...]
    sense: Sense
    rhs: float
    text: str = ""


@dataclass(frozen=True)
class WeightPredicate:
    """User constraints on the weights, beyond nonnegativity and sum-to-one."""

    constraints: tuple[PredicateConstraint, ...] = ()

    @classmethod
    def empty(cls) -> "WeightPredicate":
        return cls(())

    def __len__(self):
        return len(self.constraints)

    def add_rows(self, program: Program, weight_vars: dict[str, int]):
        for pc in self.constraints:
            expr = LinearExpr()
            for col, coef in pc.coeffs:
                expr.add_term(weight_vars[col], coef)
            program.add_constraint(expr, pc.sense, pc.rhs,
                                   name=f"pred:{pc.text or 'row'}", lazy=False)

    def lines(self) -> list[str]:
        return [pc.text for pc in self.constraints if pc.text]


_NUM_RE = r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"


def parse_weight_predicate(text, columns) -> WeightPredicate:
    """Parse constraint lines like ``PTS <= 0.1`` or ``BLK <= PTS + AST``.

    One constraint per line; ``#`` starts a comment; operators are <=, >= and
    = (strict < and > are rejected, the engine only accepts closed sets).
    Attribute names are matched longest-first so names like ``3P%`` work.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = list(text)
    columns = list(columns)
    name_alt = "|".join(re.escape(c) for c in sorted(columns, key=len, reverse=True))
    token_re = re.compile(
        rf"\s*(?:(?P<op><=|>=|==|=|<|>)|(?P<name>{name_alt})|(?P<num>{_NUM_RE})|(?P<sym>[+\-*]))"
    )
    constraints = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = []
        pos = 0
        while pos < len(line):
            m = token_re.match(line, pos)
            if not m or m.end() == pos:
                raise ValueError(f"line {lineno}: cannot parse near {line[pos:pos + 12]!r}")
            tokens.append((m.lastgroup, m.group(m.lastgroup)))
            pos = m.end()
        ops = [t for t in tokens if t[0] == "op"]
        if len(ops) != 1:
            raise ValueError(f"line {lineno}: need exactly one comparison operator")
        op = ops[0][1]
        if op in ("<", ">"):
            raise ValueError(f"line {lineno}: strict operator {op!r} not supported; use {op}=")
        cut = tokens.index(ops[0])
        lhs_c, lhs_k = _parse_side(tokens[:cut], lineno)
        rhs_c, rhs_k = _parse_side(tokens[cut + 1:], lineno)
        coeffs: dict[str, float] = {}
        for col, v in lhs_c.items():
            coeffs[col] = coeffs.get(col, 0.0) + v
        for col, v in rhs_c.items():
            coeffs[col] = coeffs.get(col, 0.0) - v
        coeffs = {c: v for c, v in coeffs.items() if v != 0.0}
        sense = {"<=": Sense.LE, ">=": Sense.GE, "=": Sense.EQ, "==": Sense.EQ}[op]
        constraints.append(PredicateConstraint(tuple(sorted(coeffs.items())), sense,
                                               rhs_k - lhs_k, text=line))
    return WeightPredicate(tuple(constraints))


def _parse_side(tokens, lineno):
    coeffs: dict[str, float] = {}
    const = 0.0
    sign = 1.0
    pending: float | None = None
    for kind, value in tokens:
        if kind == "sym" and value in "+-":
            if pending is not None:
                const += sign * pending
                pending = None
            sign = 1.0 if value == "+" else -1.0
        elif kind == "sym":  # '*'
            if pending is None:
                raise ValueError(f"line {lineno}: '*' without a leading number")
        elif kind == "num":
            if pending is not None:
                raise ValueError(f"line {lineno}: two numbers in a row")
            pending = float(value)
        elif kind == "name":
            coef = pending if pending is not None else 1.0
            coeffs[value] = coeffs.get(value, 0.0) + sign * coef
            pending = None
            sign = 1.0
        else:
            raise ValueError(f"line {lineno}: unexpected token {value!r}")
    if pending is not None:
        const += sign * pending
    if not tokens:
        raise ValueError(f"line {lineno}: empty expression side")
    return coeffs, const


# ---------------------------------------------------------------------------
# Problem spec


@dataclass(frozen=True)
class ProblemSpec:
    """A complete problem instance: data, target ranking, k, and options."""

    relation: Relation
    ranking: GivenRanking
    k: int
    predicate: WeightPredicate = field(default_factory=WeightPredicate.empty)
    importance: dict[str, float] = field(default_factory=dict)
    eps: EpsilonConfig = field(default_factory=EpsilonConfig)
    objective: str = "sum"

    def __post_init__(self):
        if not 1 <= self.k <= self.relation.n:
            raise ValueError(f"k must be in 1..{self.relation.n}")
        if set(self.ranking.order) != set(self.relation.ids):
            raise ValueError("ranking must be a permutation of the relation's ids")
        for tid, u in self.importance.items():
            if tid not in self.relation:
                raise ValueError(f"importance for unknown id {tid!r}")
            if u < 0:
                raise ValueError("importance factors must be >= 0")
        if self.objective not in ("sum", "max"):
            raise ValueError("objective must be 'sum' or 'max'")

    def importance_of(self, tuple_id: str) -> float:
        return float(self.importance.get(tuple_id, 1.0))

    def top_ids(self) -> tuple[str, ...]:
        return self.ranking.top_k_ids(self.k)

    def replace(self, **kwargs) -> "ProblemSpec":
        data = {
            "relation": self.relation, "ranking": self.ranking, "k": self.k,
            "predicate": self.predicate, "importance": self.importance,
            "eps": self.eps, "objective": self.objective,
        }
        data.update(kwargs)
        return ProblemSpec(**data)


# ---------------------------------------------------------------------------
# Dominance


@dataclass(frozen=True)
class DominanceIndex:
    """Componentwise dominance over a deduplicated relation.

    ``dominators[r]`` holds every s with s >= r on all attributes and > on at
    least one; for such pairs the beat indicator is weight-independent, so the
    minimum-error program drops it.
    """

    dominators: dict[str, frozenset]
    dominatees: dict[str, frozenset]

    @classmethod
    def compute(cls, relation: Relation) -> "DominanceIndex":
        a = relation.attr_matrix()
        ids = relation.ids
        dominators = {}
        dominatees: dict[str, set] = {tid: set() for tid in ids}
        for i, tid in enumerate(ids):
            ge = (a >= a[i]).all(axis=1)
            gt = (a > a[i]).any(axis=1)
            mask = ge & gt
            mask[i] = False
            doms = frozenset(ids[j] for j in np.flatnonzero(mask))
            dominators[tid] = doms
            for s in doms:
                dominatees[s].add(tid)
        return cls(dominators, {tid: frozenset(v) for tid, v in dominatees.items()})

    def resolved(self, s: str, r: str) -> bool:
        return s in self.dominators[r] or r in self.dominators[s]


def compute_dominance(relation: Relation) -> DominanceIndex:
    return DominanceIndex.compute(relation)


# ---------------------------------------------------------------------------
# Program builders


def _weight_vars(program: Program, spec: ProblemSpec) -> dict[str, int]:
    wvars = {c: program.add_continuous(f"w[{c}]", 0.0, 1.0) for c in spec.relation.columns}
    program.add_constraint(LinearExpr({v: 1.0 for v in wvars.values()}), Sense.EQ, 1.0,
                           name="simplex", lazy=False)
    spec.predicate.add_rows(program, wvars)
    return wvars


def _diff_expr(a: np.ndarray, hi: int, lo: int, wvars_list: list[int]) -> LinearExpr:
    diff = a[hi] - a[lo]
    return LinearExpr({v: d for v, d in zip(wvars_list, diff) if d != 0.0})


def build_sat(spec: ProblemSpec, eps: EpsilonConfig | None = None) -> tuple[Program, dict[str, int]]:
    """Feasibility program for exact top-k reproduction.

    Adjacent top-k pairs get their score relation (with margin eps1 for >,
    exact equality for =); every lower-ranked tuple only needs a score not
    above the k-th tuple's.  Continuous-only; objective constant 0.
    """
    eps = eps or spec.eps
    p = Program("sat")
    wvars = _weight_vars(p, spec)
    wlist = list(wvars.values())
    a = spec.relation.attr_matrix()
    order = spec.ranking.order
    idx = [spec.relation.index_of(t) for t in order]
    k, n = spec.k, spec.ranking.n

    for j in range(k - 1):
        expr = _diff_expr(a, idx[j], idx[j + 1], wlist)
        if spec.ranking.relations[j] is Rel.GREATER:
            p.add_constraint(expr, Sense.GE, eps.eps1, name=f"chain:{order[j]}>{order[j + 1]}")
        else:
            p.add_constraint(expr, Sense.EQ, 0.0, name=f"chain:{order[j]}={order[j + 1]}")
    kth = idx[k - 1]
    for j in range(k, n):
        expr = _diff_expr(a, kth, idx[j], wlist)
        p.add_constraint(expr, Sense.GE, 0.0, name=f"bound:{order[k - 1]}>={order[j]}")
    p.set_objective(LinearExpr())
    return p, wvars


@dataclass
class IndicatorLayout:
    """Bookkeeping for the minimum-error program: variable ids and constants."""

    weight_vars: dict[str, int]
    delta_vars: dict[tuple[str, str], int]
    error_vars: dict[str, int]
    big_m: dict[tuple[str, str], float]
    constants: dict[str, float]
    n_dominators: dict[str, int]
    n_dominatees: dict[str, int]
    top_ids: tuple[str, ...]
    objective_mode: str = "sum"

    def pairs_of(self, r: str) -> list[tuple[str, str]]:
        return [pair for pair in self.delta_vars if pair[1] == r]


def certified_big_m(attr_diff: np.ndarray, eps: EpsilonConfig) -> float:
    """Per-pair M: since scores are convex combinations of attributes, the
    score difference never exceeds the largest attribute difference."""
    return float(np.max(np.abs(attr_diff))) + max(abs(eps.eps1), abs(eps.eps2))


def build_opt(spec: ProblemSpec, eps: EpsilonConfig | None = None,
              dominance: DominanceIndex | None = None, prune: bool = True,
              strengthen: bool = True) -> tuple[Program, IndicatorLayout]:
    """Minimum-position-error program over beat indicators.

    For each top-k tuple r the signed surplus  rank(r) - 1 - n2(r) - sum(delta)
    feeds an absolute-value term weighted by r's importance (or a shared max
    variable).  Dominance-resolved pairs are folded into the constant n2;
    ``prune=False`` keeps every indicator for testing.  ``strengthen`` adds
    exclusion and transitivity rows among existing indicators, which are
    implied for integer points but tighten the LP relaxation.
    """
    eps = eps or spec.eps
    if prune and dominance is None:
        dominance = compute_dominance(spec.relation)
    p = Program("opt")
    wvars = _weight_vars(p, spec)
    wlist = list(wvars.values())
    a = spec.relation.attr_matrix()
    rel = spec.relation
    top = spec.top_ids()
    top_set = set(top)

    delta_vars: dict[tuple[str, str], int] = {}
    big_m: dict[tuple[str, str], float] = {}
    constants: dict[str, float] = {}
    n_dom: dict[str, int] = {}
    n_dee: dict[str, int] = {}

    for r in top:
        ri = rel.index_of(r)
        if prune:
            doms = dominance.dominators[r]
            dees = dominance.dominatees[r]
        else:
            doms = frozenset()
            dees = frozenset()
        n_dom[r] = len(doms)
        n_dee[r] = len(dees)
        constants[r] = spec.ranking.rank_of(r) - 1 - len(doms)
        for s in rel.ids:
            if s == r or s in doms or s in dees:
                continue
            si = rel.index_of(s)
            delta = p.add_binary(f"d[{s}>{r}]")
            delta_vars[(s, r)] = delta
            diff = a[si] - a[ri]
            m_val = certified_big_m(diff, eps)
            big_m[(s, r)] = m_val
            add_indicator_pair(p, delta, LinearExpr({v: d for v, d in zip(wlist, diff) if d != 0.0}),
                               eps.eps1, eps.eps2, m_val, name=f"d[{s}>{r}]")

    error_vars: dict[str, int] = {}
    if spec.objective == "sum":
        for r in top:
            expr = LinearExpr(constant=constants[r])
            for pair, var in delta_vars.items():
                if pair[1] == r:
                    expr.add_term(var, -1.0)
            error_vars[r] = add_abs_term(p, expr, weight=spec.importance_of(r), name=f"e[{r}]")
    else:
        e = p.add_continuous("e[max]", lb=0.0)
        for r in top:
            pos = LinearExpr({var: 1.0 for pair, var in delta_vars.items() if pair[1] == r})
            pos.add_term(e, 1.0)
            p.add_constraint(pos, Sense.GE, constants[r], name=f"max+:{r}", lazy=False)
            neg = LinearExpr({var: -1.0 for pair, var in delta_vars.items() if pair[1] == r})
            neg.add_term(e, 1.0)
            p.add_constraint(neg, Sense.GE, -constants[r], name=f"max-:{r}", lazy=False)
            error_vars[r] = e
        p.set_objective(LinearExpr({e: 1.0}))

    if strengthen and eps.eps1 > max(eps.eps2, 0.0):
        _add_strengthening_cuts(p, delta_vars, top_set, rel.ids)

    if spec.objective == "max" or all(
        abs(spec.importance_of(r) - round(spec.importance_of(r))) < 1e-12 for r in top
    ):
        p.objective_granularity = 1.0 if spec.objective == "max" else _importance_gcd(spec, top)

    layout = IndicatorLayout(wvars, delta_vars, error_vars, big_m, constants,
                             n_dom, n_dee, top, spec.objective)
    return p, layout


def _importance_gcd(spec: ProblemSpec, top) -> float:
    vals = [int(round(spec.importance_of(r))) for r in top]
    g = 0
    for v in vals:
        g = math.gcd(g, v)
    return float(g) if g > 0 else 1.0


def _add_strengthening_cuts(p: Program, delta_vars, top_set, all_ids, cap: int = 50_000):
    # mutual exclusion: s and r cannot both strictly beat each other
    added = 0
    for (s, r), var in list(delta_vars.items()):
        if (r, s) in delta_vars and s < r:
            p.add_constraint(LinearExpr({var: 1.0, delta_vars[(r, s)]: 1.0}),
                             Sense.LE, 1.0, name=f"excl:{s}|{r}")
            added += 1
    # transitivity: a beats b and b beats c forces a beats c (margins compound)
    budget = cap - added
    if budget <= 0:
        return
    by_first: dict[str, list[str]] = {}
    for (s, r) in delta_vars:
        by_first.setdefault(s, []).append(r)
    count = 0
    for b in sorted(top_set):
        for a_id in by_first:
            if a_id == b or (a_id, b) not in delta_vars:
                continue
            for c in by_first.get(b, ()):
                if c == a_id or (a_id, c) not in delta_vars:
                    continue
                p.add_constraint(
                    LinearExpr({delta_vars[(a_id, b)]: 1.0, delta_vars[(b, c)]: 1.0,
                                delta_vars[(a_id, c)]: -1.0}),
                    Sense.LE, 1.0, name=f"tri:{a_id}|{b}|{c}")
                count += 1
                if count >= budget:
                    return


def decoded_delta_assignment(spec: ProblemSpec, layout: IndicatorLayout,
                             weights: np.ndarray, eps: EpsilonConfig | None = None):
    """Indicator/error assignment implied by concrete weights, or None when a
    score difference lands in the unrepresentable gap (eps2, eps1)."""
    eps = eps or spec.eps
    a = spec.relation.attr_matrix()
    scores = a @ weights
    idx = {tid: i for i, tid in enumerate(spec.relation.ids)}
    values: dict[int, float] = {}
    for col, var in layout.weight_vars.items():
        values[var] = float(weights[list(spec.relation.columns).index(col)])
    sums: dict[str, float] = {r: 0.0 for r in layout.top_ids}
    for (s, r), var in layout.delta_vars.items():
        diff = scores[idx[s]] - scores[idx[r]]
        if diff >= eps.eps1 - 1e-15:
            values[var] = 1.0
            sums[r] += 1.0
        elif diff <= eps.eps2 + 1e-15:
            values[var] = 0.0
        else:
            return None
    if layout.objective_mode == "sum":
        for r in layout.top_ids:
            values[layout.error_vars[r]] = abs(layout.constants[r] - sums[r])
    else:
        worst = max((abs(layout.constants[r] - sums[r]) for r in layout.top_ids), default=0.0)
        for r in layout.top_ids:
            values[layout.error_vars[r]] = worst
    return values


def make_rounding_heuristic(spec: ProblemSpec, layout: IndicatorLayout,
                            eps: EpsilonConfig | None = None):
    """Branch-and-bound incumbent hook: decode the relaxation's weights into a
    full integer assignment whenever the implied indicators are representable."""
    wvar_list = [layout.weight_vars[c] for c in spec.relation.columns]

    def heuristic(program, values):
        w = np.array([values[v] for v in wvar_list])
        if w.min() < -1e-9:
            return None
        return decoded_delta_assignment(spec, layout, w, eps)

    return heuristic
