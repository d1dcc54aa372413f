"""Semidefinite feasibility: problem container, solver, SDPA interchange."""

from .problem import FEASIBLE, INFEASIBLE, UNKNOWN, ProblemBuilder, SdpProblem, SdpSolution, SolveOutcome
from .sdpa import export_standard, import_standard
from .solver import SolverOptions, solve_feasibility

__all__ = [
    "FEASIBLE",
    "INFEASIBLE",
    "UNKNOWN",
    "ProblemBuilder",
    "SdpProblem",
    "SdpSolution",
    "SolveOutcome",
    "SolverOptions",
    "solve_feasibility",
    "export_standard",
    "import_standard",
]
