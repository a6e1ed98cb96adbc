"""MILP kernel: instance model, simplex, branch-and-bound, MPS bridge."""

from .branch_and_bound import brute_force_binary, solve_milp
from .external import MilpSolver, resolve_solver, solve_external
from .instance import (
    Constraint,
    MilpInstance,
    MilpSolution,
    Sense,
    SolverConfig,
    SolveStatus,
    Variable,
    VarKind,
)
from .mps import constraint_dump, read_mps, write_mps
from .simplex import solve_lp

__all__ = [
    "Constraint",
    "MilpInstance",
    "MilpSolution",
    "MilpSolver",
    "Sense",
    "SolverConfig",
    "SolveStatus",
    "Variable",
    "VarKind",
    "brute_force_binary",
    "constraint_dump",
    "read_mps",
    "resolve_solver",
    "solve_external",
    "solve_lp",
    "solve_milp",
    "write_mps",
]
