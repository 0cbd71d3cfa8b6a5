import math

import numpy as np
import pytest
import scipy.integrate

from fracmfe.errors import (
    DenominatorVanished,
    HorizonReached,
    InvalidProblem,
    NoPositivePart,
    NotConverged,
    NotOnConstraint,
)
from fracmfe.flows import (
    FlowConfig,
    dopri5_step,
    flow1_run,
    flow2_run,
    flow_limit_compare,
    integrate,
    make_initial_on_M,
)
from fracmfe.functionals import (
    alpha_coeff,
    curvature_R,
    flow_drive,
    make_problem,
    residual_mfe,
    weighted_exp_integral,
)
from fracmfe.graph import path_graph

H_SIGN = [1.0, -0.5, 1.0]


@pytest.fixture(scope="module")
def sign_problem(p3_half):
    return make_problem(p3_half.graph, 1.0, H_SIGN)


@pytest.fixture(scope="module")
def traj1(p3_half, sign_problem):
    return flow1_run(p3_half, sign_problem, np.zeros(3))


@pytest.fixture(scope="module")
def traj2(p3_half, sign_problem):
    return flow2_run(p3_half, sign_problem, make_initial_on_M(p3_half.graph, sign_problem.h))


def test_dopri5_fifth_order():
    f = lambda y: y  # noqa: E731
    errs = []
    for dt in (0.2, 0.1):
        y_new, _, _ = dopri5_step(f, np.array([1.0]), np.array([1.0]), dt)
        errs.append(abs(y_new[0] - math.exp(dt)))
    assert 40 < errs[0] / errs[1] < 80  # local error O(dt^6)


def test_integrator_matches_solve_ivp():
    A = np.array([[-1.0, 0.5], [0.2, -2.0]])
    f = lambda y: A @ y  # noqa: E731
    y0 = np.array([1.0, -1.0])
    cfg = FlowConfig(t_max=2.0, rtol=1e-10, atol=1e-12)
    out = {}

    def on_step(t, y, k):
        out["t"], out["y"] = t, y.copy()

    with pytest.raises(HorizonReached):
        integrate(f, y0, cfg, on_step)
    assert out["t"] == pytest.approx(2.0, rel=1e-15)
    ref = scipy.integrate.solve_ivp(lambda t, y: A @ y, (0, 2.0), y0, rtol=1e-12, atol=1e-14, method="DOP853")
    assert np.allclose(out["y"], ref.y[:, -1], atol=1e-9)


def test_flow1_constant_h_immediately_stationary(p3_half):
    tr = flow1_run(p3_half, make_problem(p3_half.graph, 1.0, 1.0), np.zeros(3))
    assert tr.stationary and tr.times.size == 1
    assert np.all(tr.final_state == 0)


def test_flow1_sign_changing(p3_half, sign_problem, traj1):
    assert traj1.stationary
    u = traj1.final_state
    assert np.max(np.abs(residual_mfe(p3_half, sign_problem, u))) <= 1e-6
    assert traj1.relative_drift() <= 1e-6
    assert traj1.max_energy_increase() <= 1e-10
    assert np.all(np.diff(traj1.times) > 0)
    assert traj1.final_report.residual_inf == traj1.residual[-1]


def test_flow1_against_solve_ivp(p3_half, sign_problem, traj1):
    t_end = float(traj1.times[10])
    ref = scipy.integrate.solve_ivp(
        lambda t, u: np.exp(-u) * flow_drive(p3_half, sign_problem, u),
        (0, t_end),
        np.zeros(3),
        rtol=1e-11,
        atol=1e-13,
        method="DOP853",
    )
    assert np.allclose(traj1.states[10], ref.y[:, -1], atol=1e-7)


def test_flow1_perturbation_returns(p3_half, sign_problem, traj1):
    u0 = traj1.final_state + 0.1 * p3_half.spectral.mode(1)
    tr = flow1_run(p3_half, sign_problem, u0)
    assert tr.stationary
    assert tr.energy[-1] <= traj1.energy[-1] + 1e-8


def test_flow1_dissipation_identity(p3_half, sign_problem):
    cfg = FlowConfig(t_max=0.3, dt0=1e-3, rtol=1e-12, atol=1e-14)
    with pytest.raises(HorizonReached) as info:
        flow1_run(p3_half, sign_problem, np.zeros(3), cfg)
    tr = info.value.best
    g = p3_half.graph
    for k in range(0, tr.times.size - 1, 5):
        dt = tr.times[k + 1] - tr.times[k]
        slope = (tr.energy[k + 1] - tr.energy[k]) / dt
        dis = []
        for u in (tr.states[k], tr.states[k + 1]):
            ut = np.exp(-u) * flow_drive(p3_half, sign_problem, u)
            dis.append(float(g.mu @ (np.exp(u) * ut * ut)))
        assert -slope == pytest.approx(0.5 * (dis[0] + dis[1]), rel=1e-2)


def test_flow2_sign_changing(p3_half, sign_problem, traj2):
    assert traj2.stationary
    assert np.max(np.abs(traj2.conserved - 1.0)) <= 1e-6
    assert traj2.max_energy_increase() <= 1e-10
    assert abs(traj2.alpha[-1] - 1.0) <= 1e-4
    u = traj2.final_state
    assert np.max(np.abs(residual_mfe(p3_half, sign_problem, u))) <= 1e-6
    assert abs(weighted_exp_integral(p3_half.graph, sign_problem.h, u) - 1.0) <= 1e-12
    assert traj2.stats["max_repair"] <= 1e-6


def test_flow2_dissipation_identity(p3_half, sign_problem):
    cfg = FlowConfig(t_max=0.3, dt0=1e-3, rtol=1e-12, atol=1e-14)
    u0 = make_initial_on_M(p3_half.graph, sign_problem.h)
    with pytest.raises(HorizonReached) as info:
        flow2_run(p3_half, sign_problem, u0, cfg)
    tr = info.value.best
    g = p3_half.graph
    for k in range(0, tr.times.size - 1, 5):
        slope = (tr.energy[k + 1] - tr.energy[k]) / (tr.times[k + 1] - tr.times[k])
        dis = []
        for u in (tr.states[k], tr.states[k + 1]):
            R = curvature_R(p3_half, sign_problem, u)
            d = alpha_coeff(p3_half, sign_problem, u, R) * sign_problem.h - R
            dis.append(sign_problem.rho * float(g.mu @ (d * d * np.exp(u))))
        assert -slope == pytest.approx(0.5 * (dis[0] + dis[1]), rel=1e-2)


def test_flow2_uniform_h_stationary(p3_half):
    tr = flow2_run(p3_half, make_problem(p3_half.graph, 1.0, 1 / 3), np.zeros(3))
    assert tr.stationary and tr.times.size == 1
    assert tr.alpha[0] == pytest.approx(1.0, rel=1e-14)


def test_flow2_requires_constraint(p3_half, sign_problem):
    u0 = make_initial_on_M(p3_half.graph, sign_problem.h) + 0.1
    with pytest.raises(NotOnConstraint):
        flow2_run(p3_half, sign_problem, u0)


def test_flows_need_positive_rho(p3_half):
    p = make_problem(p3_half.graph, -1.0, H_SIGN)
    with pytest.raises(InvalidProblem):
        flow1_run(p3_half, p, np.zeros(3))
    with pytest.raises(NoPositivePart):
        flow1_run(p3_half, make_problem(p3_half.graph, 1.0, [-1, 0, -1]), np.zeros(3))


def test_flow1_degenerate_start(k2_half):
    with pytest.raises(DenominatorVanished):
        flow1_run(k2_half, make_problem(k2_half.graph, 1.0, [1, -1]), np.zeros(2))


def test_horizon_returns_partial(p3_half, sign_problem):
    with pytest.raises(HorizonReached) as info:
        flow1_run(p3_half, sign_problem, np.zeros(3), FlowConfig(t_max=0.5))
    tr = info.value.best
    assert not tr.stationary and tr.status == "horizon"
    assert tr.times[-1] == pytest.approx(0.5, rel=1e-14)


def test_make_initial_on_M():
    g = path_graph(3)
    assert np.allclose(make_initial_on_M(g, np.full(3, 1 / 3)), 0.0, atol=1e-15)
    u = make_initial_on_M(g, H_SIGN)
    assert abs(weighted_exp_integral(g, np.array(H_SIGN), u) - 1.0) <= 1e-12
    with pytest.raises(NoPositivePart):
        make_initial_on_M(g, [-1.0, 0.0, -2.0])


def test_limit_compare(traj1, traj2):
    assert flow_limit_compare(traj1, traj1) == 0.0
    d = flow_limit_compare(traj1, traj2)
    assert d >= 0.0 and math.isfinite(d)


def test_limit_compare_unconverged(p3_half, sign_problem, traj1):
    with pytest.raises(HorizonReached) as info:
        flow1_run(p3_half, sign_problem, np.zeros(3), FlowConfig(t_max=0.1))
    with pytest.raises(NotConverged):
        flow_limit_compare(traj1, info.value.best)


def test_restart_determinism(p3_half, sign_problem, traj1):
    again = flow1_run(p3_half, sign_problem, np.zeros(3))
    assert np.array_equal(again.states, traj1.states)
    assert np.array_equal(again.times, traj1.times)
    assert np.array_equal(again.energy, traj1.energy)


def test_on_sample_streams_every_sample(p3_half, sign_problem):
    rows = []
    tr = flow2_run(
        p3_half,
        sign_problem,
        make_initial_on_M(p3_half.graph, sign_problem.h),
        on_sample=lambda *row: rows.append(row),
    )
    assert len(rows) == tr.times.size
    assert [r[0] for r in rows] == list(tr.times)


def test_sample_stride(p3_half, sign_problem):
    tr = flow1_run(p3_half, sign_problem, np.zeros(3), FlowConfig(sample_every=4))
    assert tr.stationary
    assert tr.times.size < 20


def test_config_validation():
    with pytest.raises(InvalidProblem):
        FlowConfig(rtol=0.0)
    with pytest.raises(InvalidProblem):
        FlowConfig(sample_every=0)
