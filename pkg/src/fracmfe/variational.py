"""Minimization of J_rho over mean-zero functions, for strictly positive h.

On mean-zero directions the mu-gradient of J_rho, projected to mean zero,
is exactly the mean field residual, so one evaluation serves as both the
descent direction and the convergence certificate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import LineSearchFailed, MaxIterations, RequiresPositiveH
from .fractional import FractionalOperator, dirichlet_energy
from .functionals import ProblemData, Regime, j_rho, residual_mfe, weighted_exp_integral
from .graph import as_function
from .results import SolveReport

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100_000
    u0: np.ndarray | None = None
    armijo_c1: float = 1e-4
    step0: float = 1.0
    step_floor: float = 1e-16
    stagnation_rel: float = 1e-14


def dirichlet_form(op: FractionalOperator, u: np.ndarray, v: np.ndarray) -> float:
    """``int grad^s u grad^s v dmu``."""
    du = u[:, None] - u[None, :]
    dv = v[:, None] - v[None, :]
    return 0.5 * float(np.sum(op.kernel * du * dv))


def energy_change(op: FractionalOperator, p: ProblemData, u: np.ndarray, d: np.ndarray) -> float:
    """``J_rho(u + d) - J_rho(u)`` evaluated without cancellation."""
    g = op.graph
    w = g.mu * p.h * np.exp(u)
    w /= w.sum()
    quad = dirichlet_form(op, u, d) + 0.5 * dirichlet_energy(op, d)
    return quad - p.rho * math.log1p(float(w @ np.expm1(d)))


def _project(mu: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u - float(mu @ u) / float(mu.sum())


def solve_variational(op: FractionalOperator, p: ProblemData, cfg: SolverConfig | None = None) -> SolveReport:
    """Projected gradient descent with Armijo backtracking on J_rho.

    Returns a mean-zero ``u`` with ``||residual_mfe(u)||_inf <= cfg.tol``.

    Raises
    ------
    RequiresPositiveH
        Unless ``min h > 0``.
    MaxIterations, LineSearchFailed
        With the best iterate's :class:`SolveReport` in ``.best``.
    """
    cfg = cfg or SolverConfig()
    if p.regime is not Regime.POSITIVE:
        raise RequiresPositiveH("variational route needs min h > 0")
    g = op.graph
    mu = g.mu
    u = np.zeros(g.n) if cfg.u0 is None else _project(mu, as_function(g, cfg.u0).copy())

    # lower-bound witness int h e^u >= h0|V| exp(-sqrt(C_P/mu0) ||grad u||_2), C_P = 1/lambda_1^s
    c1 = float(np.min(p.h)) * g.volume
    c2 = -math.sqrt(1.0 / op.lambda1_s / g.mu_min)
    lb_min_ratio = math.inf

    J0 = j_rho(op, p, np.zeros(g.n))
    energy = j_rho(op, p, u)
    r = residual_mfe(op, p, u)
    max_drift = abs(float(mu @ u))
    small_changes = 0
    stagnation_iter = -1
    min_decrease_ratio = math.inf

    def report(k: int) -> SolveReport:
        diag = {
            "J_initial_zero": J0,
            "mean_drift_max": max_drift,
            "stagnation_iter": stagnation_iter,
            "armijo_min_ratio": min_decrease_ratio,
        }
        if p.rho < 0:
            diag["lower_bound_min_ratio"] = lb_min_ratio
        return SolveReport(
            u=u.copy(),
            residual_inf=float(np.max(np.abs(residual_mfe(op, p, u)))),
            iterations=k,
            energy=j_rho(op, p, u),
            method="variational",
            gauge="mean_zero",
            diagnostics=diag,
        )

    for k in range(cfg.max_iter + 1):
        if p.rho < 0:
            val = weighted_exp_integral(g, p.h, u)
            lb_min_ratio = min(lb_min_ratio, val / (c1 * math.exp(c2 * math.sqrt(dirichlet_energy(op, u)))))
        rinf = float(np.max(np.abs(r)))
        if rinf <= cfg.tol:
            log.info("variational converged in %d iterations, residual %.3e", k, rinf)
            return report(k)
        if k == cfg.max_iter:
            break
        g2 = float(mu @ (r * r))
        t = cfg.step0
        while True:
            cand = _project(mu, u - t * r)
            dJ = energy_change(op, p, u, cand - u)
            if dJ <= -cfg.armijo_c1 * t * g2:
                break
            t *= 0.5
            if t < cfg.step_floor:
                raise LineSearchFailed(
                    f"Armijo backtracking below {cfg.step_floor} at iteration {k}", best=report(k)
                )
        min_decrease_ratio = min(min_decrease_ratio, -dJ / (t * g2)) if g2 > 0 else min_decrease_ratio
        if abs(dJ) <= cfg.stagnation_rel * max(abs(energy), 1.0):
            small_changes += 1
            if small_changes >= 3 and stagnation_iter < 0:
                stagnation_iter = k
        else:
            small_changes = 0
        max_drift = max(max_drift, abs(float(mu @ cand)))
        u = cand
        energy += dJ
        r = residual_mfe(op, p, u)
        log.debug("iter %d step %.3e J %.16e residual %.3e", k, t, energy, rinf)

    raise MaxIterations(f"no convergence in {cfg.max_iter} iterations", best=report(cfg.max_iter))


def multistart_variational(
    op: FractionalOperator,
    p: ProblemData,
    starts: int,
    seed: int = 0,
    scale: float = 1.0,
    cfg: SolverConfig | None = None,
    distinct_tol: float = 1e-6,
) -> list[SolveReport]:
    """Solve from ``u0 = 0`` and ``starts`` random initial points; keep distinct limits."""
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(seed)
    found: list[SolveReport] = []
    inits = [np.zeros(op.n)] + [rng.uniform(-scale, scale, op.n) for _ in range(starts)]
    for u0 in inits:
        run = SolverConfig(**{**cfg.__dict__, "u0": u0})
        try:
            rep = solve_variational(op, p, run)
        except (MaxIterations, LineSearchFailed):
            continue
        if all(np.max(np.abs(rep.u - q.u)) > distinct_tol for q in found):
            found.append(rep)
    return found
