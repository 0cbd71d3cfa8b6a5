"""Graph Laplacian and its full mu-orthonormal eigendecomposition.

``-Delta`` is self-adjoint for the mu-inner product but its matrix
``M^{-1}(D - W)`` is not symmetric. We diagonalize the congruent symmetric
matrix ``S = M^{-1/2} (D - W) M^{-1/2}`` with cyclic Jacobi rotations and map
the eigenvectors back through ``M^{-1/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EigensolverFailure
from .graph import Graph, as_function

OFF_TOL = 1e-14
ZERO_TOL_REL = 1e-9


def laplacian_matrix(g: Graph) -> np.ndarray:
    """Matrix ``L`` with ``L @ u == -Delta u``."""
    return (np.diag(g.degree) - g.weight_matrix) / g.mu[:, None]


def laplacian_apply(g: Graph, u) -> np.ndarray:
    """Return ``-Delta u(x) = (1/mu(x)) sum_{y~x} w_xy (u(x) - u(y))``."""
    u = as_function(g, u)
    return (g.degree * u - g.weight_matrix @ u) / g.mu


def symmetrized_laplacian(g: Graph) -> np.ndarray:
    r = 1.0 / np.sqrt(g.mu)
    S = r[:, None] * (np.diag(g.degree) - g.weight_matrix) * r[None, :]
    return 0.5 * (S + S.T)


def _off_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(S: np.ndarray, tol: float = OFF_TOL, max_rotations: int | None = None):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Sweeps over all pairs ``p < q`` until the off-diagonal Frobenius norm is
    at most ``tol * ||S||_F``. Returns unsorted ``(eigenvalues, V)`` with
    ``S = V diag(eigenvalues) V^T``.

    Raises
    ------
    EigensolverFailure
        If more than ``max_rotations`` (default ``100 n^2``) rotations are needed.
    """
    A = np.array(S, dtype=float, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    cap = 100 * n * n if max_rotations is None else int(max_rotations)
    scale = float(np.linalg.norm(A))
    if scale == 0.0:
        return np.zeros(n), V
    threshold = tol * scale
    rotations = 0
    while _off_norm(A) > threshold:
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
                rotations += 1
                if rotations > cap:
                    raise EigensolverFailure(
                        f"Jacobi exceeded {cap} rotations (off-norm {_off_norm(A):.3e})"
                    )
    return np.diag(A).copy(), V


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenpairs of ``-Delta``; ``phi[:, i]`` is the i-th eigenfunction."""

    graph: Graph
    eigenvalues: np.ndarray
    phi: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def zero_tol(self) -> float:
        return ZERO_TOL_REL * float(self.eigenvalues[-1])

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[1])

    def mode(self, i: int) -> np.ndarray:
        return self.phi[:, i].copy()


def _fix_signs(phi: np.ndarray) -> np.ndarray:
    # phi_0 made positive; other modes: largest-magnitude entry positive
    for i in range(phi.shape[1]):
        col = phi[:, i]
        k = 0 if i == 0 else int(np.argmax(np.abs(col)))
        if col[k] < 0:
            phi[:, i] = -col
    return phi


def eigendecompose(g: Graph) -> SpectralData:
    """Full eigendecomposition of ``-Delta`` on ``g``.

    Eigenvalues ascending, eigenfunctions orthonormal in the mu-inner
    product, ``phi_0 > 0``, and ``lambda_0`` stored as exactly zero.
    """
    lam, Z = jacobi_eigh(symmetrized_laplacian(g))
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    phi = Z[:, order] / np.sqrt(g.mu)[:, None]
    phi /= np.sqrt(g.mu @ (phi * phi))[None, :]
    phi = _fix_signs(phi)

    zero_tol = ZERO_TOL_REL * float(lam[-1])
    n_zero = int(np.sum(np.abs(lam) <= zero_tol))
    if n_zero != 1 or lam[1] <= zero_tol:
        raise EigensolverFailure(
            f"expected exactly one zero eigenvalue, found {n_zero} (lambda_1 = {lam[1]:.3e})"
        )
    lam[0] = 0.0
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SpectralData(graph=g, eigenvalues=lam, phi=phi)


def spectral_errors(spec: SpectralData) -> dict[str, float]:
    """Residual norms certifying an eigendecomposition."""
    g = spec.graph
    L = laplacian_matrix(g)
    phi, lam = spec.phi, spec.eigenvalues
    resid = L @ phi - phi * lam[None, :]
    gram = phi.T @ (g.mu[:, None] * phi)
    completeness = phi @ phi.T * g.mu[None, :]
    phi0 = phi[:, 0]
    return {
        "eig_residual": float(np.max(np.abs(resid))),
        "ortho_error": float(np.max(np.abs(gram - np.eye(g.n)))),
        "completeness_error": float(np.max(np.abs(completeness - np.eye(g.n)))),
        "phi0_const_error": float(np.max(np.abs(phi0 - 1.0 / math.sqrt(g.volume)))),
        "trace_rel_error": abs(float(lam.sum()) - float(np.sum(g.degree / g.mu)))
        / float(np.sum(g.degree / g.mu)),
    }
