"""Symmetric eigen-decomposition via the cyclic Jacobi method.

Used for the PCA covariance (128x128) and the DLT normal matrix (9x9),
both small enough that Jacobi's robustness beats fancier solvers.
"""

from __future__ import annotations

import numpy as np


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Sweeps row by row over the upper triangle, zeroing one off-diagonal
    element per rotation, until the off-diagonal Frobenius mass falls
    below ``tol`` relative to the matrix norm.

    Returns ``(eigenvalues, eigenvectors)`` sorted descending, with
    eigenvectors as columns. Raises ValueError if ``a`` is not square
    or not symmetric.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-8 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix is not symmetric")

    n = a.shape[0]
    A = 0.5 * (a + a.T)  # exact symmetry for the rotation updates
    V = np.eye(n)
    norm = max(np.linalg.norm(A), np.finfo(np.float64).tiny)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2.0)
        if off <= tol * norm:
            break
        # Skip rotations on elements already far below the sweep's scale.
        small = tol * norm / max(n, 1)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= small:
                    continue
                app, aqq = A[p, p], A[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = 0.0
                A[q, p] = 0.0

                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq

    eigenvalues = np.diag(A).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def smallest_eigenvector(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Unit eigenvector of the smallest eigenvalue of symmetric ``a``."""
    w, v = jacobi_eigh(a, tol=tol)
    vec = v[:, -1]
    return vec / np.linalg.norm(vec)
