"""Discrete fractional Laplacians and mean field equations on finite weighted graphs."""

from .errors import FracMFEError, InputError, SolverError
from .fractional import FractionalOperator, build_fractional, frac_apply
from .functionals import ProblemData, Regime, make_problem, residual_mfe
from .graph import Graph, build_graph, complete_graph, cycle_graph, path_graph, star_graph
from .spectral import SpectralData, eigendecompose

__all__ = [
    "FracMFEError",
    "FractionalOperator",
    "Graph",
    "InputError",
    "ProblemData",
    "Regime",
    "SolverError",
    "SpectralData",
    "build_fractional",
    "build_graph",
    "complete_graph",
    "cycle_graph",
    "eigendecompose",
    "frac_apply",
    "make_problem",
    "path_graph",
    "residual_mfe",
    "star_graph",
]

__version__ = "0.1.0"
