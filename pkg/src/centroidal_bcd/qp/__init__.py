"""Sparse QP canonical form and solvers."""

from .admm import AdmmSolver, setup
from .problem import (
    INFTY,
    QpSolution,
    SolverSettings,
    SparseQP,
    TripletPattern,
    VariableLayout,
    kkt_residuals,
    pattern_hash,
)

__all__ = [
    "INFTY",
    "AdmmSolver",
    "QpSolution",
    "SolverSettings",
    "SparseQP",
    "TripletPattern",
    "VariableLayout",
    "kkt_residuals",
    "pattern_hash",
    "setup",
]
