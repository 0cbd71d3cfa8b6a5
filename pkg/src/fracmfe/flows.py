"""The two mean field heat flows, integrated with an adaptive Dormand-Prince pair.

Flow 1 is run in the form ``du/dt = e^{-u} F(u)`` with ``F`` the flow drive;
it conserves ``int e^u dmu`` and dissipates ``J_{rho,h}``. Flow 2 is
``du/dt = alpha(t) h - R(u)``; it conserves ``int h e^u dmu`` and dissipates
the constrained energy. Both stop once the mean field residual falls below
``stop_residual`` at a sample point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateDenominator,
    DenominatorVanished,
    HorizonReached,
    InvalidProblem,
    NoPositivePart,
    NotConverged,
    NotOnConstraint,
    StepUnderflow,
)
from .fractional import FractionalOperator
from .functionals import (
    CONSTRAINT_TOL,
    ProblemData,
    alpha_coeff,
    curvature_R,
    denom_tol,
    flow_drive,
    j_constrained,
    j_rho_h,
    residual_mfe,
    weighted_exp_integral,
)
from .graph import Graph, as_function
from .results import SolveReport

log = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
ENERGY_SLACK = 1e-10
ALPHA_TOL = 1e-4


@dataclass
class FlowConfig:
    t_max: float = 1e6
    dt0: float = 1e-2
    rtol: float = 1e-8
    atol: float = 1e-10
    stop_residual: float = 1e-6
    sample_every: int = 1
    drift_limit: float = 1e-5
    max_steps: int = 2_000_000

    def __post_init__(self):
        for name in ("t_max", "dt0", "rtol", "atol", "stop_residual", "drift_limit"):
            if not getattr(self, name) > 0:
                raise InvalidProblem(f"FlowConfig.{name} must be positive")
        if self.sample_every < 1 or self.max_steps < 1:
            raise InvalidProblem("sample_every and max_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    flow: str
    times: np.ndarray
    states: np.ndarray  # (samples, n)
    energy: np.ndarray
    conserved: np.ndarray
    residual: np.ndarray
    alpha: np.ndarray | None
    stationary: bool
    status: str  # stationary | horizon | denominator_vanished | drift_exceeded
    final_report: SolveReport
    mu: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()

    def relative_drift(self) -> float:
        c0 = self.conserved[0]
        return float(np.max(np.abs(self.conserved - c0)) / abs(c0))

    def max_energy_increase(self) -> float:
        if self.energy.size < 2:
            return 0.0
        return float(np.max(np.diff(self.energy)))

    def summary(self) -> dict:
        d = {
            "flow": self.flow,
            "status": self.status,
            "stationary": self.stationary,
            "samples": int(self.times.size),
            "t_end": float(self.times[-1]),
            "energy_initial": float(self.energy[0]),
            "energy_final": float(self.energy[-1]),
            "max_energy_increase": self.max_energy_increase(),
            "conserved_initial": float(self.conserved[0]),
            "conserved_relative_drift": self.relative_drift(),
            "residual_final": float(self.residual[-1]),
        }
        if self.alpha is not None:
            d["alpha_final"] = float(self.alpha[-1])
        d.update(self.stats)
        return d


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    sc = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def dopri5_step(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, k1: np.ndarray, dt: float):
    """One Dormand-Prince step of the autonomous system ``y' = f(y)``.

    Returns ``(y_new, k_last, err)``; ``k_last = f(y_new)`` is reused by the
    next step.
    """
    ks = [k1]
    for i in range(1, 7):
        yi = y + dt * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(yi))
    y_new = y + dt * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = dt * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, ks[6], err


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    cfg: FlowConfig,
    on_step: Callable[[float, np.ndarray, int], np.ndarray | bool | None],
):
    """Adaptive integration of ``y' = f(y)`` from t = 0.

    ``on_step(t, y, k)`` is called after every accepted step ``k``. It may
    return a replacement state (for renormalization) or ``True`` to stop.
    Returns ``(t, y, stats)``; raises :class:`HorizonReached` when ``t_max``
    or ``max_steps`` is hit and :class:`StepUnderflow` when steps collapse.
    """
    y = np.array(y0, dtype=float, copy=True)
    t, dt = 0.0, cfg.dt0
    k1 = f(y)
    accepted = rejected = 0
    last_failure: Exception | None = None
    while True:
        if t >= cfg.t_max or accepted >= cfg.max_steps:
            raise HorizonReached(f"no stationarity by t = {t:.6g} ({accepted} steps)")
        dt = min(dt, cfg.t_max - t)
        if dt < 1e-14 * max(1.0, t):
            if isinstance(last_failure, DenominatorVanished):
                raise DenominatorVanished(f"denominator vanished near t = {t:.6g}") from last_failure
            raise StepUnderflow(f"step {dt:.3e} underflowed at t = {t:.6g}")
        try:
            with np.errstate(over="raise", invalid="raise"):
                y_new, k_new, err = dopri5_step(f, y, k1, dt)
            en = _error_norm(err, y, y_new, cfg.rtol, cfg.atol)
        except (FloatingPointError, DenominatorVanished) as exc:
            en = math.inf
            last_failure = exc
        if not math.isfinite(en) or en > 1.0:
            rejected += 1
            fac = FAC_MIN if not math.isfinite(en) else max(FAC_MIN, SAFETY * en ** -0.2)
            dt *= fac
            continue
        t += dt
        accepted += 1
        last_failure = None
        y, k1 = y_new, k_new
        out = on_step(t, y, accepted)
        if out is True:
            return t, y, {"accepted_steps": accepted, "rejected_steps": rejected}
        if isinstance(out, np.ndarray):
            y = out
            k1 = f(y)
        fac = FAC_MAX if en == 0.0 else min(FAC_MAX, max(FAC_MIN, SAFETY * en ** -0.2))
        dt *= fac


class _Recorder:
    def __init__(self, mu, on_sample):
        self.mu = mu
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.energy: list[float] = []
        self.conserved: list[float] = []
        self.residual: list[float] = []
        self.alpha: list[float] = []
        self.on_sample = on_sample

    def add(self, t, u, J, c, r, a=None):
        self.times.append(float(t))
        self.states.append(u.copy())
        self.energy.append(float(J))
        self.conserved.append(float(c))
        self.residual.append(float(r))
        if a is not None:
            self.alpha.append(float(a))
        if self.on_sample is not None:
            self.on_sample(float(t), u, float(J), float(c), None if a is None else float(a), float(r))

    def build(self, flow, status, report, stats):
        return Trajectory(
            flow=flow,
            times=np.array(self.times),
            states=np.array(self.states),
            energy=np.array(self.energy),
            conserved=np.array(self.conserved),
            residual=np.array(self.residual),
            alpha=np.array(self.alpha) if self.alpha else None,
            stationary=status == "stationary",
            status=status,
            final_report=report,
            mu=self.mu,
            stats=stats,
        )


def _require_flow_problem(p: ProblemData) -> None:
    if p.rho <= 0:
        raise InvalidProblem("the heat flows need rho > 0")
    if float(np.max(p.h)) <= 0:
        raise NoPositivePart("the heat flows need max h > 0")


def _res_inf(op, p, u) -> float:
    return float(np.max(np.abs(residual_mfe(op, p, u))))


def flow1_run(op: FractionalOperator, p: ProblemData, u0, cfg: FlowConfig | None = None, on_sample=None) -> Trajectory:
    """Integrate the first flow from ``u0`` until stationarity.

    ``on_sample(t, u, J, conserved, alpha, residual)`` is invoked for every
    recorded sample, so callers can stream partial results.

    Raises
    ------
    DenominatorVanished, HorizonReached, StepUnderflow
        With the partial :class:`Trajectory` in ``.best``.
    """
    cfg = cfg or FlowConfig()
    _require_flow_problem(p)
    g = op.graph
    u0 = as_function(g, u0).copy()
    if abs(weighted_exp_integral(g, p.h, u0)) <= denom_tol(g, p, u0):
        raise DenominatorVanished("int h e^{u0} is degenerate")

    def rhs(u):
        try:
            return np.exp(-u) * flow_drive(op, p, u)
        except DegenerateDenominator as exc:
            raise DenominatorVanished(str(exc)) from exc

    rec = _Recorder(g.mu, on_sample)
    c0 = float(g.mu @ np.exp(u0))
    state = {"u": u0, "t": 0.0, "status": "horizon"}

    def sample(t, u):
        r = _res_inf(op, p, u)
        c = float(g.mu @ np.exp(u))
        rec.add(t, u, j_rho_h(op, p, u), c, r)
        state["u"], state["t"] = u, t
        if abs(c - c0) / c0 > cfg.drift_limit:
            state["status"] = "drift_exceeded"
            return True
        if r <= cfg.stop_residual:
            state["status"] = "stationary"
            return True
        return None

    stats: dict = {}

    def finish(status):
        u = state["u"]
        report = SolveReport(
            u=u.copy(),
            residual_inf=rec.residual[-1],
            iterations=int(stats.get("accepted_steps", 0)),
            energy=rec.energy[-1],
            method="flow1",
            gauge="none",
            diagnostics={"t_end": state["t"], "mass_relative_drift": abs(rec.conserved[-1] - c0) / c0},
        )
        return rec.build("flow1", status, report, dict(stats))

    if sample(0.0, u0) is True:
        return finish(state["status"])

    def on_step(t, u, k):
        if k % cfg.sample_every == 0:
            try:
                return sample(t, u)
            except DegenerateDenominator as exc:
                state["u"] = u
                raise DenominatorVanished(str(exc)) from exc
        return None

    try:
        _, _, st = integrate(rhs, u0, cfg, on_step)
    except (HorizonReached, StepUnderflow, DenominatorVanished) as exc:
        status = {HorizonReached: "horizon", StepUnderflow: "step_underflow", DenominatorVanished: "denominator_vanished"}[type(exc)]
        if rec.times:
            exc.best = finish(status)
        raise
    stats.update(st)
    log.info("flow1 %s at t=%.6g, residual %.3e", state["status"], state["t"], rec.residual[-1])
    return finish(state["status"])


def flow2_run(op: FractionalOperator, p: ProblemData, u0, cfg: FlowConfig | None = None, on_sample=None) -> Trajectory:
    """Integrate the second flow from ``u0`` on the constraint set.

    After every sample ``u`` is shifted by ``-log int h e^u``; the value
    before the shift is what ``conserved`` records, and the largest shift is
    reported as ``max_repair``.
    """
    cfg = cfg or FlowConfig()
    _require_flow_problem(p)
    g = op.graph
    u0 = as_function(g, u0).copy()
    c_init = weighted_exp_integral(g, p.h, u0)
    if abs(c_init - 1.0) > CONSTRAINT_TOL:
        raise NotOnConstraint(f"int h e^{{u0}} = {c_init!r} is not 1")

    def rhs(u):
        R = curvature_R(op, p, u)
        return alpha_coeff(op, p, u, R) * p.h - R

    rec = _Recorder(g.mu, on_sample)
    state = {"u": u0, "t": 0.0, "status": "horizon", "max_repair": 0.0}

    def sample(t, u):
        c = weighted_exp_integral(g, p.h, u)
        if c > 0:
            shift = math.log(c)
            u = u - shift
            state["max_repair"] = max(state["max_repair"], abs(shift))
        r = _res_inf(op, p, u)
        rec.add(t, u, j_constrained(op, p, u, tol=math.inf), c, r, alpha_coeff(op, p, u))
        state["u"], state["t"] = u, t
        if abs(c - 1.0) > cfg.drift_limit:
            state["status"] = "drift_exceeded"
            return True
        if r <= cfg.stop_residual:
            state["status"] = "stationary"
            return True
        return u

    stats: dict = {}

    def finish(status):
        u = state["u"]
        report = SolveReport(
            u=u.copy(),
            residual_inf=rec.residual[-1],
            iterations=int(stats.get("accepted_steps", 0)),
            energy=rec.energy[-1],
            method="flow2",
            gauge="constraint_M",
            diagnostics={
                "t_end": state["t"],
                "alpha_final": rec.alpha[-1],
                "constraint_error": abs(weighted_exp_integral(g, p.h, u) - 1.0),
                "max_repair": state["max_repair"],
            },
        )
        return rec.build("flow2", status, report, {**stats, "max_repair": state["max_repair"]})

    if sample(0.0, u0) is True:
        return finish(state["status"])
    u_start = state["u"]

    def on_step(t, u, k):
        if k % cfg.sample_every == 0:
            return sample(t, u)
        return None

    try:
        _, _, st = integrate(rhs, u_start, cfg, on_step)
    except (HorizonReached, StepUnderflow) as exc:
        exc.best = finish("horizon" if isinstance(exc, HorizonReached) else "step_underflow")
        raise
    stats.update(st)
    log.info("flow2 %s at t=%.6g, residual %.3e", state["status"], state["t"], rec.residual[-1])
    return finish(state["status"])


def make_initial_on_M(g: Graph, h) -> np.ndarray:
    """A point with ``int h e^u dmu = 1``: ``c`` on ``{h > 0}``, 0 elsewhere, then log-shifted."""
    h = as_function(g, h)
    pos = h > 0
    if not np.any(pos):
        raise NoPositivePart("max h <= 0: the constraint set is empty")
    s_pos = float(g.mu[pos] @ h[pos])
    s_neg = float(g.mu[~pos] @ h[~pos])
    # int h e^u = e^c s_pos + s_neg is linear in e^c
    u = np.where(pos, math.log((1.0 - s_neg) / s_pos), 0.0)
    return u - math.log(weighted_exp_integral(g, h, u))


def flow_limit_compare(traj1: Trajectory, traj2: Trajectory) -> float:
    """Sup-distance between the mean-zero representatives of two stationary limits."""
    for tr in (traj1, traj2):
        if not tr.stationary:
            raise NotConverged(f"{tr.flow} trajectory ended with status {tr.status!r}")
    if traj1.states.shape[1] != traj2.states.shape[1]:
        raise InvalidProblem("trajectories live on different graphs")
    mu = traj1.mu
    a = traj1.final_state
    b = traj2.final_state
    a -= float(mu @ a) / float(mu.sum())
    b -= float(mu @ b) / float(mu.sum())
    return float(np.max(np.abs(a - b)))
