import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from fracmfe.diagnostics import check_apriori
from fracmfe.errors import InvalidProblem, NotAZero
from fracmfe.fractional import build_fractional
from fracmfe.functionals import make_problem, residual_mfe, residual_transformed, transformed_jacobian, weighted_exp_integral
from fracmfe.graph import complete_graph, path_graph, random_connected_graph
from fracmfe.homotopy import (
    HomotopyConfig,
    _newton,
    brouwer_degree,
    constant_zero_sign,
    default_epsilon,
    degree_sign_at,
    homotopy_map,
    newton_solve,
    solve_homotopy,
)
from fracmfe.spectral import eigendecompose


def test_newton_unique_negative_rho(p3_half):
    p = make_problem(p3_half.graph, -1.0, 1.0)
    v0 = np.random.default_rng(0).uniform(-2, 2, 3)
    v = newton_solve(p3_half, p, v0)
    assert np.max(np.abs(v + math.log(3))) <= 1e-9


def test_newton_small_eps(p3_half):
    eps = 0.05
    p = make_problem(p3_half.graph, 1.0, eps)
    v = newton_solve(p3_half, p, np.zeros(3))
    assert np.max(np.abs(v + math.log(3 * eps))) <= 1e-9


def test_newton_fixed_point(p3_half):
    p = make_problem(p3_half.graph, 1.0, [1, 2, 1])
    v = newton_solve(p3_half, p, np.full(3, -1.0))
    _, its = _newton(
        lambda x: residual_transformed(p3_half, p, x),
        lambda x: transformed_jacobian(p3_half, p, x),
        v,
        1e-10,
        50,
        1e-8,
    )
    assert its <= 1


def test_homotopy_map_endpoints(p3_half):
    for rho in (2.0, -2.0):
        p = make_problem(p3_half.graph, rho, [1, 0, 1])
        T, DT, v_end = homotopy_map(p3_half, p, 0.1)
        assert np.max(np.abs(T(v_end, 1.0))) <= 1e-14
        v = np.array([0.2, -0.3, 0.5])
        assert np.allclose(T(v, 0.0), residual_transformed(p3_half, p, v), atol=1e-14)
        assert np.allclose(DT(v, 0.0), transformed_jacobian(p3_half, p, v), atol=1e-14)


def test_uniform_h_solution():
    g = path_graph(3)
    op = build_fractional(eigendecompose(g), 0.5)
    rep = solve_homotopy(op, make_problem(g, 1.0, 1 / 3))
    assert np.max(np.abs(rep.u)) <= 1e-10


@pytest.mark.parametrize("rho", [1.0, -1.0])
@pytest.mark.parametrize("eps", [0.1, 1.0, 10.0])
def test_constant_h_solution(p3_half, rho, eps):
    rep = solve_homotopy(p3_half, make_problem(p3_half.graph, rho, eps))
    assert np.max(np.abs(rep.u + math.log(3 * eps))) <= 1e-8


def test_nonneg_negative_rho(p3_half):
    p = make_problem(p3_half.graph, -2.0, [1, 0, 1])
    rep = solve_homotopy(p3_half, p)
    assert rep.diagnostics["transformed_residual_inf"] <= 1e-10
    assert check_apriori(p3_half, p, rep.u, p.lam)[2]
    assert rep.diagnostics["apriori_ok"] and rep.diagnostics["elliptic_ok"]


def test_nonneg_positive_rho(p3_half):
    p = make_problem(p3_half.graph, 1.0, [0, 1, 0])
    rep = solve_homotopy(p3_half, p)
    assert rep.residual_inf <= 1e-8
    lo, hi, ok = check_apriori(p3_half, p, rep.u, p.lam)
    assert ok and lo <= rep.u.min() and rep.u.max() <= hi


def test_rejects_sign_changing(p3_half):
    with pytest.raises(InvalidProblem):
        solve_homotopy(p3_half, make_problem(p3_half.graph, 1.0, [1, -1, 1]))
    with pytest.raises(InvalidProblem):
        brouwer_degree(p3_half, make_problem(p3_half.graph, 1.0, [1, -1, 1]), 5)


@settings(max_examples=15)
@given(st.integers(min_value=0, max_value=100_000), st.sampled_from([0.25, 0.5, 0.75]))
def test_negative_rho_matches_root_oracle(seed, s):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 8)), rng)
    op = build_fractional(eigendecompose(g), s)
    h = rng.uniform(0.0, 2.0, g.n)
    h[0] = 1.0
    p = make_problem(g, -float(rng.uniform(0.5, 3)), h)
    rep = solve_homotopy(op, p)
    ref = scipy.optimize.root(
        lambda v: residual_transformed(op, p, v),
        np.full(g.n, -math.log(g.volume)),
        jac=lambda v: transformed_jacobian(op, p, v),
        tol=1e-13,
    )
    assert ref.success
    assert np.max(np.abs(rep.u - ref.x)) <= 1e-8
    assert abs(weighted_exp_integral(g, p.h, rep.u) - 1) <= 1e-8
    assert np.max(np.abs(residual_mfe(op, p, rep.u))) <= 1e-8
    assert degree_sign_at(op, p, rep.u) == 1


def test_degree_sign_negative_endpoint(p3_half):
    p = make_problem(p3_half.graph, -1.0, 1.0)
    v = np.full(3, -math.log(3))
    assert degree_sign_at(p3_half, p, v) == 1 == constant_zero_sign(p3_half, -1.0)


def test_degree_sign_positive_constant(k2_half):
    # lambda_1^s = sqrt 2 > rho/|V|: one negative eigenvalue direction
    for eps in (0.1, 0.5, 2.0):
        p = make_problem(k2_half.graph, 1.0, eps)
        v = np.full(2, -math.log(2 * eps))
        assert degree_sign_at(k2_half, p, v) == -1 == constant_zero_sign(k2_half, 1.0)


def test_degree_sign_deformed_endpoint(p3_half):
    eps = default_epsilon(p3_half)
    p = make_problem(p3_half.graph, eps, 1 / eps)
    v = np.full(3, math.log(eps / 3))
    assert degree_sign_at(p3_half, p, v) == -1 == constant_zero_sign(p3_half, eps)


def test_constant_zero_sign_large_rho(p3_half):
    # rho/|V| above lambda_1^s = 1 but below lambda_2^s = sqrt 3 flips one factor
    assert constant_zero_sign(p3_half, 4.0) == 1
    p = make_problem(p3_half.graph, 4.0, 1.0)
    assert degree_sign_at(p3_half, p, np.full(3, -math.log(3))) == 1


def test_not_a_zero(p3_half):
    p = make_problem(p3_half.graph, 1.0, 1.0)
    with pytest.raises(NotAZero):
        degree_sign_at(p3_half, p, np.zeros(3))


@pytest.mark.parametrize("rho, expected", [(1.0, -1), (-1.0, 1)])
def test_brouwer_degree_k2(k2_half, rho, expected):
    res = brouwer_degree(k2_half, make_problem(k2_half.graph, rho, 1.0), 50, seed=0)
    assert res.degree == expected
    assert res.status == "matches_expected"
    assert all(np.max(np.abs(residual_transformed(k2_half, make_problem(k2_half.graph, rho, 1.0), z))) <= 1e-8 for z in res.zeros)


def test_brouwer_degree_empty(k2_half):
    res = brouwer_degree(k2_half, make_problem(k2_half.graph, 1.0, 1.0), 0)
    assert res.degree == 0 and res.status == "incomplete" and res.zeros == []


def test_brouwer_degree_deterministic(p3_half):
    p = make_problem(p3_half.graph, 1.0, [1, 0, 1])
    a = brouwer_degree(p3_half, p, 20, seed=5).to_dict()
    b = brouwer_degree(p3_half, p, 20, seed=5).to_dict()
    assert a == b


def test_config_validation():
    with pytest.raises(InvalidProblem):
        HomotopyConfig(steps=0)
