"""Shared fixtures: small worked instances used across the suite."""
import numpy as np
import pytest

from rankfit.formulate import ProblemSpec
from rankfit.model import (
    GivenRanking,
    Rel,
    Relation,
    TupleRecord,
    WeightVector,
    generate_uniform,
    ranking_from_weights,
)


@pytest.fixture
def three_tuple_relation():
    # r, s, t with s dominating t; no function ranks s above r above t wrongly
    return Relation(
        ["A1", "A2", "A3"],
        [
            TupleRecord("r", (3.0, 2.0, 8.0)),
            TupleRecord("s", (4.0, 1.0, 15.0)),
            TupleRecord("t", (1.0, 1.0, 14.0)),
        ],
    )


@pytest.fixture
def three_tuple_ranking():
    return GivenRanking(["r", "s", "t"], [Rel.GREATER, Rel.GREATER])


@pytest.fixture
def three_tuple_spec(three_tuple_relation, three_tuple_ranking):
    def make(k=3, **kwargs):
        return ProblemSpec(three_tuple_relation, three_tuple_ranking, k, **kwargs)

    return make


def random_instance(seed, n, m, k, shuffle_swaps=0):
    """Relation + ranking generated from a random weight vector.

    With shuffle_swaps > 0, that many adjacent strict pairs are swapped, which
    usually makes exact reproduction impossible.
    """
    rng = np.random.default_rng(seed)
    rel = generate_uniform(n, m, seed=seed)
    w = WeightVector.normalized(rng.random(m) + 0.05)
    ranking = ranking_from_weights(rel, w)
    order = list(ranking.order)
    for _ in range(shuffle_swaps):
        i = int(rng.integers(0, n - 1))
        order[i], order[i + 1] = order[i + 1], order[i]
    return rel, GivenRanking(order, ranking.relations), w
