import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracmfe.errors import EigensolverFailure
from fracmfe.graph import build_graph, complete_graph, path_graph, random_connected_graph
from fracmfe.spectral import (
    eigendecompose,
    jacobi_eigh,
    laplacian_apply,
    laplacian_matrix,
    spectral_errors,
    symmetrized_laplacian,
)

from conftest import named_graphs, random_graphs


def test_laplacian_examples():
    assert np.allclose(laplacian_apply(complete_graph(2), [1, 0]), [1, -1], atol=0)
    assert np.allclose(laplacian_apply(path_graph(3), [1, 0, 0]), [1, -1, 0], atol=0)
    assert np.all(laplacian_apply(path_graph(4), 3.0) == 0)


def test_laplacian_uses_measure():
    g = build_graph(2, [2.0, 0.5], [(0, 1, 3.0)])
    assert np.allclose(laplacian_apply(g, [1, 0]), [1.5, -6.0], rtol=1e-15)
    assert np.allclose(laplacian_matrix(g) @ [1, 0], [1.5, -6.0], rtol=1e-15)


def test_k2_eigenpairs():
    sp = eigendecompose(complete_graph(2))
    assert np.allclose(sp.eigenvalues, [0, 2], atol=1e-14)
    assert sp.eigenvalues[0] == 0.0
    r = 1 / math.sqrt(2)
    assert np.allclose(sp.mode(0), [r, r], atol=1e-15)
    assert np.allclose(np.abs(sp.mode(1)), [r, r], atol=1e-15)
    assert sp.mode(1)[0] * sp.mode(1)[1] < 0


def test_p3_eigenvalues():
    sp = eigendecompose(path_graph(3))
    assert np.allclose(sp.eigenvalues, [0, 1, 3], atol=1e-14)


def test_sign_convention():
    for g in named_graphs().values():
        sp = eigendecompose(g)
        assert np.all(sp.phi[:, 0] > 0)


def test_result_is_read_only():
    sp = eigendecompose(path_graph(3))
    with pytest.raises(ValueError):
        sp.eigenvalues[1] = 0.0


@pytest.mark.parametrize("g", list(named_graphs().values()) + random_graphs(8, seed=11))
def test_against_numpy_oracle(g):
    sp = eigendecompose(g)
    ref = np.linalg.eigvalsh(symmetrized_laplacian(g))
    ref[0] = 0.0
    assert np.max(np.abs(sp.eigenvalues - ref)) <= 1e-12 * max(1.0, ref[-1])
    err = spectral_errors(sp)
    assert err["eig_residual"] <= 1e-10
    assert err["ortho_error"] <= 1e-10
    assert err["completeness_error"] <= 1e-10
    assert err["phi0_const_error"] <= 1e-10


@given(st.integers(min_value=0, max_value=100_000), st.integers(min_value=1, max_value=9))
def test_jacobi_diagonalizes_random_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    A = A + A.T
    lam, V = jacobi_eigh(A)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)
    assert np.allclose(V @ np.diag(lam) @ V.T, A, atol=1e-11 * max(1.0, np.abs(A).max()))
    assert np.allclose(np.sort(lam), np.linalg.eigvalsh(A), atol=1e-11 * max(1.0, np.abs(A).max()))


def test_jacobi_zero_matrix():
    lam, V = jacobi_eigh(np.zeros((3, 3)))
    assert np.all(lam == 0) and np.array_equal(V, np.eye(3))


def test_jacobi_rotation_cap():
    A = np.array([[1.0, 0.5], [0.5, 2.0]])
    with pytest.raises(EigensolverFailure):
        jacobi_eigh(A, max_rotations=0)


@given(st.integers(min_value=0, max_value=100_000))
def test_trace_and_weighted_mode_sum(seed):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 10)), rng)
    sp = eigendecompose(g)
    assert spectral_errors(sp)["trace_rel_error"] <= 1e-12
    # eigenvalue relation against the unsymmetrized matrix
    L = laplacian_matrix(g)
    for i in range(g.n):
        assert np.allclose(L @ sp.phi[:, i], sp.eigenvalues[i] * sp.phi[:, i], atol=1e-10)


def test_eigenfunction_zero_mean():
    g = random_graphs(1, seed=5)[0]
    sp = eigendecompose(g)
    for i in range(1, g.n):
        assert abs(float(g.mu @ sp.phi[:, i])) <= 1e-12
