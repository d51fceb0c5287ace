"""rankfit: explain a given top-k ranking with linear scoring functions.

Given a relation and a ranking of its tuples (but no scoring function), decide
whether any nonnegative-weight linear function reproduces the top-k exactly,
or find the one minimizing total position error, under user constraints on
the weights.  Ships its own LP/MILP engine, a numerical-robustness protocol,
scalability heuristics, baselines, a CLI, and an HTTP exploration service.
"""
from . import approx, baselines, engine, evaluate, formulate, model
from .evaluate import (
    ExplanationReport,
    metrics,
    pairwise_penalty,
    position_error,
    solve_opt,
    solve_sat,
    solve_with_escalation,
    verify_report,
)
from .formulate import (
    DominanceIndex,
    EpsilonConfig,
    ProblemSpec,
    WeightPredicate,
    build_opt,
    build_sat,
    compute_dominance,
    parse_weight_predicate,
)
from .model import (
    GivenRanking,
    Rel,
    Relation,
    TupleRecord,
    WeightVector,
    build_unsat_ranking,
    generate_uniform,
    load_ranking,
    load_relation,
    ranking_from_scores,
    score,
    transform_weights,
)

__version__ = "0.1.0"
