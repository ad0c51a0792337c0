from . import solvers, symmetric
from .solvers import (
    DEFAULT_TOL,
    ExactSolver,
    PowerMethod,
    SpectralSolverBase,
    default_max_iter,
    dominant_eigpair,
    resolve_solver,
    solver_by_name,
)
from .symmetric import EigPair, SymMatrix, jacobi_eig, uncentered_covariance


class Defaults:
    Power = PowerMethod
    Exact = ExactSolver


__all__ = (
    "Defaults",
    "solvers",
    "symmetric",
    "DEFAULT_TOL",
    "EigPair",
    "ExactSolver",
    "PowerMethod",
    "SpectralSolverBase",
    "SymMatrix",
    "default_max_iter",
    "dominant_eigpair",
    "jacobi_eig",
    "resolve_solver",
    "solver_by_name",
    "uncentered_covariance",
)
