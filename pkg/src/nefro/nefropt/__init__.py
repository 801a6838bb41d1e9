"""Learned-relation substitution in coexistence capacity/SINR programs."""

from .evaluate import (
    MatrixResult,
    NefroEval,
    evaluate_pair,
    learned_relation,
    run_matrix,
    run_scenario,
    timed_solve,
)
from .problem import (
    Cir,
    ConstraintKind,
    LinkBudget,
    Objective,
    OptProblem,
    Relation,
    build_problem,
    constraint_select,
    link_budget,
)
from .solver import FunctionProblem, Problem, SolveResult, SolverConfig, solve

__all__ = [
    "Cir", "ConstraintKind", "FunctionProblem", "LinkBudget", "MatrixResult", "NefroEval",
    "Objective", "OptProblem", "Problem", "Relation", "SolveResult", "SolverConfig",
    "build_problem", "constraint_select", "evaluate_pair", "learned_relation", "link_budget",
    "run_matrix", "run_scenario", "solve", "timed_solve",
]
