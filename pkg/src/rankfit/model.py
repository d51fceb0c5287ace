"""Relations, rankings, weight vectors, normalization and synthetic data.

All types are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

WEIGHT_SUM_TOL = 1e-9


class Rel(str, Enum):
    """Relation between two adjacent tuples of a given ranking."""

    GREATER = ">"
    EQUAL = "="


@dataclass(frozen=True)
class TupleRecord:
    """One row of a relation: an opaque id plus numeric ranking attributes."""

    id: str
    attrs: tuple[float, ...]


class Relation:
    """An ordered set of tuples sharing the same numeric attribute columns."""

    def __init__(self, columns, tuples):
        columns = tuple(str(c) for c in columns)
        tuples = tuple(tuples)
        if not tuples:
            raise ValueError("empty relation")
        m = len(columns)
        seen = set()
        for t in tuples:
            if len(t.attrs) != m:
                raise ValueError(f"tuple {t.id!r} has {len(t.attrs)} attributes, expected {m}")
            if t.id in seen:
                raise ValueError(f"duplicate id {t.id!r}")
            seen.add(t.id)
        self.columns = columns
        self.tuples = tuples
        self._index = {t.id: i for i, t in enumerate(tuples)}
        mat = np.array([t.attrs for t in tuples], dtype=float)
        mat.setflags(write=False)
        self._matrix = mat

    @property
    def n(self) -> int:
        return len(self.tuples)

    @property
    def m(self) -> int:
        return len(self.columns)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tuples)

    def attr_matrix(self) -> np.ndarray:
        """Read-only (n, m) float matrix of attribute values, in tuple order."""
        return self._matrix

    def index_of(self, tuple_id: str) -> int:
        try:
            return self._index[tuple_id]
        except KeyError:
            raise KeyError(f"unknown id {tuple_id!r}") from None

    def __getitem__(self, tuple_id: str) -> TupleRecord:
        return self.tuples[self.index_of(tuple_id)]

    def __contains__(self, tuple_id: str) -> bool:
        return tuple_id in self._index

    def dedup(self) -> "Relation":
        """Drop tuples whose attribute vector already occurred, keeping file order."""
        seen = {}
        kept = []
        for t in self.tuples:
            if t.attrs not in seen:
                seen[t.attrs] = t.id
                kept.append(t)
        if len(kept) == len(self.tuples):
            return self
        return Relation(self.columns, kept)

    def subset(self, ids) -> "Relation":
        """Relation restricted to the given ids, in the given order."""
        return Relation(self.columns, [self.tuples[self.index_of(i)] for i in ids])

    def __repr__(self):
        return f"Relation(n={self.n}, m={self.m})"


class GivenRanking:
    """A permutation of tuple ids where adjacent entries relate by > or =.

    The rank of a tuple is 1 plus the number of tuples strictly above it,
    so tied tuples share the rank of the first member of their tie block.
    """

    def __init__(self, order, relations):
        order = tuple(order)
        relations = tuple(Rel(r) for r in relations)
        if len(order) < 1:
            raise ValueError("empty ranking")
        if len(relations) != len(order) - 1:
            raise ValueError("need exactly len(order)-1 relations")
        if len(set(order)) != len(order):
            raise ValueError("ranking order repeats an id")
        self.order = order
        self.relations = relations
        ranks = {}
        rank = 1
        for pos, tid in enumerate(order):
            if pos > 0 and relations[pos - 1] is Rel.GREATER:
                rank = pos + 1
            ranks[tid] = rank
        self._ranks = ranks

    @property
    def n(self) -> int:
        return len(self.order)

    def rank_of(self, tuple_id: str) -> int:
        try:
            return self._ranks[tuple_id]
        except KeyError:
            raise KeyError(f"unknown id {tuple_id!r}") from None

    def ranks(self) -> dict[str, int]:
        return dict(self._ranks)

    def top_k_ids(self, k: int, strict_cutoff: bool = False) -> tuple[str, ...]:
        """The top-k prefix.

        By default this is the first k entries in permutation order.  With
        ``strict_cutoff`` a tie block straddling position k is dropped
        entirely, so only whole tie blocks are returned.
        """
        if not 1 <= k <= self.n:
            raise ValueError(f"k must be in 1..{self.n}, got {k}")
        if not strict_cutoff or k == self.n:
            return self.order[:k]
        end = k
        if self.relations[k - 1] is Rel.EQUAL:
            # tie block straddles the boundary: drop it entirely
            end = self._block_start(k - 1)
        return self.order[:end]

    def _block_start(self, pos: int) -> int:
        while pos > 0 and self.relations[pos - 1] is Rel.EQUAL:
            pos -= 1
        return pos

    def prefix(self, length: int) -> "GivenRanking":
        """Ranking restricted to its first ``length`` entries."""
        if not 1 <= length <= self.n:
            raise ValueError("bad prefix length")
        return GivenRanking(self.order[:length], self.relations[: length - 1])

    def window(self, start: int, length: int) -> "GivenRanking":
        """Ranking restricted to ``length`` adjacent entries starting at ``start``."""
        if start < 0 or length < 1 or start + length > self.n:
            raise ValueError("bad window")
        return GivenRanking(
            self.order[start : start + length],
            self.relations[start : start + length - 1],
        )

    def __repr__(self):
        return f"GivenRanking(n={self.n})"


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights over the ranking attributes, summing to 1."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if any(v < -WEIGHT_SUM_TOL for v in vals):
            raise ValueError(f"negative weight in {vals}")
        if abs(sum(vals) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {sum(vals)}, expected 1")

    @property
    def m(self) -> int:
        return len(self.values)

    @classmethod
    def uniform(cls, m: int) -> "WeightVector":
        return cls(tuple(1.0 / m for _ in range(m)))

    @classmethod
    def normalized(cls, raw) -> "WeightVector":
        """Clip tiny negatives and rescale so the weights sum to exactly 1."""
        arr = np.asarray(raw, dtype=float)
        arr = np.where(arr < 0, 0.0, arr)
        total = float(arr.sum())
        if total <= 0:
            raise ValueError("cannot normalize a nonpositive weight vector")
        return cls(tuple(arr / total))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def by_column(self, columns) -> dict[str, float]:
        return {c: v for c, v in zip(columns, self.values)}


def score(weights: WeightVector, record: TupleRecord) -> float:
    """Weighted sum of the record's attributes."""
    if weights.m != len(record.attrs):
        raise ValueError(f"dimension mismatch: {weights.m} weights vs {len(record.attrs)} attributes")
    return float(np.dot(weights.as_array(), record.attrs))


@dataclass(frozen=True)
class ScoredRanking:
    """Ranking of a relation induced by a weight vector's scores.

    ``ranks[i]`` is 1 plus the number of tuples scoring more than
    ``scores[i] + tie_tol``; tuples within ``tie_tol`` share a rank.
    """

    ids: tuple[str, ...]
    scores: np.ndarray
    ranks: np.ndarray
    tie_tol: float

    def rank_of(self, tuple_id: str) -> int:
        return int(self.ranks[self.ids.index(tuple_id)])

    def rank_map(self) -> dict[str, int]:
        return {tid: int(r) for tid, r in zip(self.ids, self.ranks)}

    def score_map(self) -> dict[str, float]:
        return {tid: float(s) for tid, s in zip(self.ids, self.scores)}

    def order_ids(self) -> tuple[str, ...]:
        """Ids sorted by descending score; ties keep original tuple order."""
        idx = np.argsort(-self.scores, kind="stable")
        return tuple(self.ids[i] for i in idx)

    def top_k_ids(self, k: int) -> tuple[str, ...]:
        return self.order_ids()[:k]


def ranking_from_scores(relation: Relation, weights: WeightVector, tie_tol: float = 0.0) -> ScoredRanking:
    """Score every tuple and rank it; scores within tie_tol count as tied."""
    if tie_tol < 0:
        raise ValueError("tie_tol must be >= 0")
    if weights.m != relation.m:
        raise ValueError("dimension mismatch between weights and relation")
    scores = relation.attr_matrix() @ weights.as_array()
    asc = np.sort(scores)
    # rank = 1 + #{s : s > score + tie_tol}
    ranks = len(scores) - np.searchsorted(asc, scores + tie_tol, side="right") + 1
    return ScoredRanking(relation.ids, scores, ranks.astype(int), float(tie_tol))


# ---------------------------------------------------------------------------
# Normalization


class NormMode(str, Enum):
    MINMAX = "minmax"
    MEAN = "mean"
    ZSCORE = "zscore"


@dataclass(frozen=True)
class NormalizationStats:
    """Per-attribute min/max/mean/std plus the affine rescale each mode applies.

    Every mode maps a column A to c*A + c' for constants (c, c') derived from
    the column statistics; ``scale`` returns the c vector for a mode.
    """

    columns: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    @classmethod
    def from_relation(cls, relation: Relation) -> "NormalizationStats":
        a = relation.attr_matrix()
        return cls(
            relation.columns,
            tuple(a.min(axis=0)),
            tuple(a.max(axis=0)),
            tuple(a.mean(axis=0)),
            tuple(a.std(axis=0)),
        )

    def scale(self, mode: NormMode) -> np.ndarray:
        mode = NormMode(mode)
        mins = np.array(self.mins)
        maxs = np.array(self.maxs)
        if mode in (NormMode.MINMAX, NormMode.MEAN):
            rng = maxs - mins
            self._check_nonzero(rng, "constant attribute column (max == min)")
            return 1.0 / rng
        stds = np.array(self.stds)
        self._check_nonzero(stds, "constant attribute column (std == 0)")
        return 1.0 / stds

    def offset(self, mode: NormMode) -> np.ndarray:
        mode = NormMode(mode)
        c = self.scale(mode)
        if mode is NormMode.MINMAX:
            return -np.array(self.mins) * c
        return -np.array(self.means) * c

    def _check_nonzero(self, arr, message):
        if np.any(arr == 0):
            bad = [c for c, v in zip(self.columns, arr) if v == 0]
            raise ValueError(f"{message}: {', '.join(bad)}")


def normalized_relation(relation: Relation, mode: NormMode) -> Relation:
    """Relation with every column rescaled to c*A + c' for the given mode."""
    stats = NormalizationStats.from_relation(relation)
    c = stats.scale(mode)
    cp = stats.offset(mode)
    mat = relation.attr_matrix() * c + cp
    tuples = [TupleRecord(t.id, tuple(float(v) for v in row)) for t, row in zip(relation.tuples, mat)]
    return Relation(relation.columns, tuples)


def transform_weights(weights: WeightVector, stats: NormalizationStats, mode: NormMode) -> WeightVector:
    """Weights that induce the same ranking on mode-normalized data.

    Each w_i becomes w_i / c_i where the mode rescales column i by c_i; the
    result is renormalized onto the simplex since positive scaling does not
    change the induced ranking.
    """
    if weights.m != len(stats.columns):
        raise ValueError("dimension mismatch between weights and stats")
    c = stats.scale(mode)
    return WeightVector.normalized(weights.as_array() / c)


# ---------------------------------------------------------------------------
# CSV / ranking file ingestion


def load_relation_text(text: str, dedup: bool = False) -> Relation:
    """Parse relation CSV text: header row, first column ``id``, numeric rest."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty relation") from None
    if not header or header[0].strip().lower() != "id":
        raise ValueError("first CSV column must be named 'id'")
    columns = [h.strip() for h in header[1:]]
    if not columns:
        raise ValueError("relation needs at least one attribute column")
    tuples = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(columns) + 1:
            raise ValueError(f"line {lineno}: expected {len(columns) + 1} cells, got {len(row)}")
        tid = row[0].strip()
        try:
            attrs = tuple(float(cell) for cell in row[1:])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric attribute cell") from None
        if any(math.isnan(a) or math.isinf(a) for a in attrs):
            raise ValueError(f"line {lineno}: non-finite attribute cell")
        tuples.append(TupleRecord(tid, attrs))
    if not tuples:
        raise ValueError("empty relation")
    rel = Relation(columns, tuples)
    return rel.dedup() if dedup else rel


def load_relation(path, dedup: bool = False) -> Relation:
    with open(path, "r", encoding="utf-8") as fh:
        return load_relation_text(fh.read(), dedup=dedup)


def relation_to_csv(relation: Relation) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("id",) + relation.columns)
    for t in relation.tuples:
        writer.writerow((t.id,) + tuple(repr(float(a)) for a in t.attrs))
    return out.getvalue()


def parse_ranking_text(text: str) -> GivenRanking:
    """Parse a ranking file: one id per line, later lines prefixed > or =."""
    order = []
    relations = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not order:
            order.append(line)
            continue
        sym, rest = line[0], line[1:].strip()
        if sym not in (">", "="):
            raise ValueError(f"line {lineno}: expected '>' or '=' prefix, got {line!r}")
        if not rest:
            raise ValueError(f"line {lineno}: missing id after {sym!r}")
        relations.append(Rel.GREATER if sym == ">" else Rel.EQUAL)
        order.append(rest)
    if not order:
        raise ValueError("empty ranking file")
    return GivenRanking(order, relations)


def load_ranking(path) -> GivenRanking:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ranking_text(fh.read())


def ranking_to_text(ranking: GivenRanking) -> str:
    lines = [ranking.order[0]]
    for rel, tid in zip(ranking.relations, ranking.order[1:]):
        lines.append(f"{rel.value} {tid}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Synthetic data


def generate_uniform(n: int, m: int, seed: int = 0) -> Relation:
    """Relation with n tuples of m iid uniform[0,1) attributes; deterministic per seed."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    rng = np.random.default_rng(seed)
    mat = rng.random((n, m))
    columns = [f"A{i + 1}" for i in range(m)]
    tuples = [TupleRecord(f"t{i + 1}", tuple(float(v) for v in row)) for i, row in enumerate(mat)]
    return Relation(columns, tuples)


def ranking_by_attribute_sum(relation: Relation) -> GivenRanking:
    """Strict ranking ordered by descending attribute sum (ties by tuple order)."""
    sums = relation.attr_matrix().sum(axis=1)
    idx = np.argsort(-sums, kind="stable")
    order = [relation.tuples[i].id for i in idx]
    return GivenRanking(order, [Rel.GREATER] * (len(order) - 1))


def ranking_from_weights(relation: Relation, weights: WeightVector, tie_tol: float = 0.0) -> GivenRanking:
    """Given-ranking induced by a weight vector, with = between tied neighbors."""
    scored = ranking_from_scores(relation, weights, tie_tol)
    order = scored.order_ids()
    rank = scored.rank_map()
    rels = [Rel.EQUAL if rank[a] == rank[b] else Rel.GREATER for a, b in zip(order, order[1:])]
    return GivenRanking(order, rels)


def build_unsat_ranking(relation: Relation) -> GivenRanking:
    """Ranking that no simplex weight vector reproduces for k=5.

    Sorts tuples by attribute sum, then moves the tuples at positions 6-10
    to positions 1-5, with strict > between all neighbors.
    """
    if relation.n < 10:
        raise ValueError(f"need at least 10 tuples, got {relation.n}")
    base = ranking_by_attribute_sum(relation).order
    order = list(base[5:10]) + list(base[0:5]) + list(base[10:])
    return GivenRanking(order, [Rel.GREATER] * (len(order) - 1))
