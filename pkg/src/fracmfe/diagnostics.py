"""Graph constants and checkable inequalities.

Each ``check_*`` returns ``(lhs, rhs, ok)`` so the margin is visible, not
just the verdict. The Poincare constant is the sharp spectral value
``1 / lambda_1^s``; path lengths in the elliptic constant use ``l = n``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConditionViolated, EnergyExceedsOne, NotASolution, NotMeanZero
from .fractional import FractionalOperator, dirichlet_energy, frac_apply
from .functionals import ProblemData, residual_transformed, weighted_exp_integral
from .graph import as_function

REL_SLACK = 1e-10


@dataclass(frozen=True)
class GraphConstants:
    lambda1_s: float
    ws_min: float
    mu_min: float
    volume: float
    elliptic_const: float
    poincare_const: float
    cg_ratio: float
    epsilon0: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_constants(op: FractionalOperator) -> GraphConstants:
    g = op.graph
    n = g.n
    lam1s = op.lambda1_s
    w0 = op.w_s_min
    vol = g.volume
    off = ~np.eye(n, dtype=bool)
    cg = float(np.min((op.kernel / g.mu[:, None])[off]))
    return GraphConstants(
        lambda1_s=lam1s,
        ws_min=w0,
        mu_min=g.mu_min,
        volume=vol,
        elliptic_const=math.sqrt((n - 1) * vol / (w0 * lam1s)),
        poincare_const=1.0 / lam1s,
        cg_ratio=cg,
        epsilon0=0.5 * g.mu_min * math.sqrt(w0 * lam1s / ((n - 1) * vol)),
    )


def _require_mean_zero(op: FractionalOperator, u: np.ndarray) -> None:
    g = op.graph
    m = abs(float(g.mu @ u))
    if m > 1e-10 * math.sqrt(float(g.mu @ (u * u))) * math.sqrt(g.volume):
        raise NotMeanZero(f"|int u dmu| = {m:.3e} is not zero")


def check_poincare(op: FractionalOperator, u):
    """``int u^2 <= C int |nabla^s u|^2`` for mean-zero ``u``."""
    u = as_function(op.graph, u)
    _require_mean_zero(op, u)
    lhs = float(op.graph.mu @ (u * u))
    rhs = compute_constants(op).poincare_const * dirichlet_energy(op, u)
    return lhs, rhs, lhs <= rhs * (1 + REL_SLACK)


def check_moser_trudinger(op: FractionalOperator, beta: float, v):
    """``int e^{beta v^2} <= e^{beta C/mu_0} |V|`` for mean-zero ``v`` with energy <= 1."""
    g = op.graph
    v = as_function(g, v)
    _require_mean_zero(op, v)
    e = dirichlet_energy(op, v)
    if e > 1 + 1e-12:
        raise EnergyExceedsOne(f"dirichlet energy {e:.6g} exceeds 1")
    c = compute_constants(op)
    value = float(g.mu @ np.exp(beta * v * v))
    bound = math.exp(beta * c.poincare_const / c.mu_min) * c.volume
    return value, bound, value <= bound * (1 + REL_SLACK)


def check_elliptic(op: FractionalOperator, u):
    """``max u - min u <= C ||(-Delta)^s u||_inf``."""
    u = as_function(op.graph, u)
    osc = float(u.max() - u.min())
    bound = compute_constants(op).elliptic_const * float(np.max(np.abs(frac_apply(op, u))))
    return osc, bound, osc <= bound * (1 + REL_SLACK)


def check_lower_bound(op: FractionalOperator, p: ProblemData, u):
    """``int h e^u >= h_0 |V| exp(-sqrt(C/mu_0) ||nabla^s u||_2)`` for positive h, mean-zero u."""
    g = op.graph
    u = as_function(g, u)
    _require_mean_zero(op, u)
    c = compute_constants(op)
    value = weighted_exp_integral(g, p.h, u)
    bound = float(np.min(p.h)) * c.volume * math.exp(
        -math.sqrt(c.poincare_const / c.mu_min) * math.sqrt(dirichlet_energy(op, u))
    )
    return value, bound, value >= bound * (1 - REL_SLACK)


def apriori_bounds(op: FractionalOperator, p: ProblemData, Lambda: float) -> tuple[float, float]:
    """Explicit box ``[lo, hi]`` containing every zero of the shifted equation."""
    c = compute_constants(op)
    vol, mu0 = c.volume, c.mu_min
    lo = -math.log(vol * Lambda)
    if p.rho > 0:
        a = Lambda**3 / mu0 + Lambda / vol
        return lo - c.elliptic_const * a, math.log(Lambda / mu0)
    hi = max(math.log(Lambda / mu0) + Lambda / (vol * c.cg_ratio), math.log(Lambda / vol))
    return lo, hi


def check_apriori(op: FractionalOperator, p: ProblemData, v, Lambda: float):
    """Membership of a zero ``v`` in its a priori box; returns ``(lo, hi, ok)``."""
    v = as_function(op.graph, v)
    res = float(np.max(np.abs(residual_transformed(op, p, v))))
    if res > 1e-8:
        raise NotASolution(f"||F(v)||_inf = {res:.3e}")
    pos = p.h[p.h > 0]
    if abs(p.rho) > Lambda or float(pos.min()) < 1.0 / Lambda or float(pos.max()) > Lambda:
        raise ConditionViolated(f"Lambda = {Lambda} does not bound rho and h")
    lo, hi = apriori_bounds(op, p, Lambda)
    return lo, hi, within_box(v, lo, hi)


def within_box(v: np.ndarray, lo: float, hi: float) -> bool:
    slack = REL_SLACK * max(1.0, abs(lo), abs(hi))
    return bool(lo - slack <= float(v.min()) and float(v.max()) <= hi + slack)
