"""Problem data and the scalar/vector functionals of the mean field equation

    (-Delta)^s u = rho (h e^u / int h e^u dmu - 1/|V|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateDenominator, InvalidProblem, NotOnConstraint, RequiresPositiveH
from .fractional import FractionalOperator, dirichlet_energy, frac_apply
from .graph import Graph, as_function

CONSTRAINT_TOL = 1e-8
DENOM_REL_TOL = 1e-12


class Regime(str, Enum):
    POSITIVE = "positive"
    NONNEG_NONTRIVIAL = "nonneg_nontrivial"
    SIGN_CHANGING = "sign_changing"
    NONPOSITIVE = "nonpositive"


def classify_h(h: np.ndarray) -> Regime:
    lo, hi = float(np.min(h)), float(np.max(h))
    if lo > 0:
        return Regime.POSITIVE
    if lo >= 0:
        return Regime.NONNEG_NONTRIVIAL
    if hi > 0:
        return Regime.SIGN_CHANGING
    # max h <= 0: no method of this package applies
    return Regime.NONPOSITIVE


@dataclass(frozen=True, eq=False)
class ProblemData:
    rho: float
    h: np.ndarray
    regime: Regime

    @property
    def lam(self) -> float:
        """Smallest admissible bound Lambda with |rho| <= Lambda and Lambda^{-1} <= h <= Lambda on {h > 0}."""
        pos = self.h[self.h > 0]
        if pos.size == 0:
            return abs(self.rho)
        return max(abs(self.rho), float(pos.max()), 1.0 / float(pos.min()))


def make_problem(g: Graph, rho: float, h) -> ProblemData:
    rho = float(rho)
    if rho == 0.0 or not math.isfinite(rho):
        raise InvalidProblem("rho must be nonzero and finite")
    h = as_function(g, h).copy()
    if not np.all(np.isfinite(h)):
        raise InvalidProblem("h must be finite")
    if not np.any(h != 0):
        raise InvalidProblem("h must not vanish identically")
    h.setflags(write=False)
    return ProblemData(rho=rho, h=h, regime=classify_h(h))


def denom_tol(g: Graph, p: ProblemData, u: np.ndarray) -> float:
    return DENOM_REL_TOL * g.volume * float(np.max(np.abs(p.h))) * math.exp(float(np.max(u)))


def weighted_exp_integral(g: Graph, h: np.ndarray, u: np.ndarray) -> float:
    """``int_V h e^u dmu``."""
    return float(g.mu @ (h * np.exp(u)))


def _checked_denominator(op: FractionalOperator, p: ProblemData, u: np.ndarray) -> float:
    g = op.graph
    d = weighted_exp_integral(g, p.h, u)
    if abs(d) <= denom_tol(g, p, u):
        raise DegenerateDenominator(f"|int h e^u dmu| = {abs(d):.3e} is degenerate")
    return d


def residual_mfe(op: FractionalOperator, p: ProblemData, u) -> np.ndarray:
    """``(-Delta)^s u - rho (h e^u / int h e^u - 1/|V|)``."""
    g = op.graph
    u = as_function(g, u)
    d = _checked_denominator(op, p, u)
    return frac_apply(op, u) - p.rho * (p.h * np.exp(u) / d - 1.0 / g.volume)


def residual_transformed(op: FractionalOperator, p: ProblemData, v) -> np.ndarray:
    """The map ``F(v) = (-Delta)^s v - rho h e^v + rho/|V|`` of the shifted equation."""
    g = op.graph
    v = as_function(g, v)
    return frac_apply(op, v) - p.rho * p.h * np.exp(v) + p.rho / g.volume


def transformed_jacobian(op: FractionalOperator, p: ProblemData, v) -> np.ndarray:
    """Derivative of :func:`residual_transformed`: ``A_s - rho diag(h e^v)``."""
    v = as_function(op.graph, v)
    J = np.array(op.matrix, copy=True)
    J[np.diag_indices(op.n)] -= p.rho * p.h * np.exp(v)
    return J


def j_rho(op: FractionalOperator, p: ProblemData, u) -> float:
    """``1/2 int |nabla^s u|^2 - rho log int h e^u``, for positive h only."""
    if p.regime is not Regime.POSITIVE:
        raise RequiresPositiveH("J_rho needs min h > 0")
    u = as_function(op.graph, u)
    return 0.5 * dirichlet_energy(op, u) - p.rho * math.log(weighted_exp_integral(op.graph, p.h, u))


def j_rho_h(op: FractionalOperator, p: ProblemData, u) -> float:
    """Energy of the first flow: ``1/2 E(u) - rho log|int h e^u| + rho/|V| int u``."""
    g = op.graph
    u = as_function(g, u)
    d = _checked_denominator(op, p, u)
    return 0.5 * dirichlet_energy(op, u) - p.rho * math.log(abs(d)) + p.rho / g.volume * float(g.mu @ u)


def on_constraint(g: Graph, p: ProblemData, u, tol: float = CONSTRAINT_TOL) -> bool:
    return abs(weighted_exp_integral(g, p.h, as_function(g, u)) - 1.0) <= tol


def j_constrained(op: FractionalOperator, p: ProblemData, u, tol: float = CONSTRAINT_TOL) -> float:
    """Energy on ``int h e^u = 1``: ``1/2 E(u) + rho/|V| int u``."""
    g = op.graph
    u = as_function(g, u)
    c = weighted_exp_integral(g, p.h, u)
    if abs(c - 1.0) > tol:
        raise NotOnConstraint(f"int h e^u = {c!r}, not within {tol} of 1")
    return 0.5 * dirichlet_energy(op, u) + p.rho / g.volume * float(g.mu @ u)


def flow_drive(op: FractionalOperator, p: ProblemData, u) -> np.ndarray:
    """``F(u) = -(-Delta)^s u + rho (h e^u / int h e^u - 1/|V|)``, the negated residual."""
    return -residual_mfe(op, p, u)


def curvature_R(op: FractionalOperator, p: ProblemData, u) -> np.ndarray:
    """Scalar-curvature-type function ``(1/rho) e^{-u} ((-Delta)^s u + rho/|V|)``."""
    g = op.graph
    u = as_function(g, u)
    return np.exp(-u) * (frac_apply(op, u) + p.rho / g.volume) / p.rho


def alpha_coeff(op: FractionalOperator, p: ProblemData, u, R: np.ndarray | None = None) -> float:
    """Normalization ``int h R e^u / int h^2 e^u``."""
    g = op.graph
    u = as_function(g, u)
    if R is None:
        R = curvature_R(op, p, u)
    eu = np.exp(u)
    return float(g.mu @ (p.h * R * eu)) / float(g.mu @ (p.h * p.h * eu))
