"""Cyclic Jacobi eigendecomposition for dense symmetric matrices.

Intended for the moderate sizes this package produces (up to a few
hundred rows).  Sweeps rotate away every off-diagonal pair in row order
until all off-diagonal entries are below an absolute tolerance.
"""

from __future__ import annotations

import numpy as np


class JacobiConvergenceError(RuntimeError):
    pass


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues and orthonormal eigenvector columns of a symmetric matrix.

    Returns (w, V) with A = V diag(w) V^T up to the tolerance; w is not
    sorted.  Raises JacobiConvergenceError if the off-diagonal mass does
    not fall below ``tol`` within ``max_sweeps`` sweeps.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-9:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 1:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = np.max(np.abs(A - np.diag(np.diag(A))))
        if off <= tol:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol * 0.01:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                vec_p = V[:, p].copy()
                vec_q = V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    off = np.max(np.abs(A - np.diag(np.diag(A))))
    if off <= tol:
        return np.diag(A).copy(), V
    raise JacobiConvergenceError(
        f"off-diagonal mass {off:.3e} above {tol:.1e} after {max_sweeps} sweeps"
    )
