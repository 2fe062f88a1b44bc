"""Small dense kernels: real SVD, nonsymmetric eigenvalues, LU solves.

These routines operate on Butcher matrices (a handful of rows) and on
moderately sized dense oracles used for spectral studies.  Inputs are
plain 2-D numpy arrays.
"""
from __future__ import annotations

import numpy as np

from .exceptions import CapacityError, ConvergenceError, DimensionError, DomainError, SingularityError

__all__ = ["svd_real", "eig_dense", "solve_dense", "lu_factor", "lu_solve", "det_dense", "sort_spectrum"]

EIG_CAP = 10_000


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def _complete_basis(U, filled):
    """Fill the columns of ``U`` not flagged in ``filled`` with an orthonormal complement."""
    n = U.shape[0]
    for j in np.flatnonzero(~filled):
        for e in np.eye(n):
            w = e - U[:, filled] @ (U[:, filled].T @ e)
            w -= U[:, filled] @ (U[:, filled].T @ w)
            nw = np.linalg.norm(w)
            if nw > 1e-8:
                U[:, j] = w / nw
                filled[j] = True
                break
    return U


def svd_real(A, tol=1e-14, max_sweeps=100):
    """Real SVD ``A = U @ diag(sigma) @ V.T`` by one-sided Jacobi rotations.

    Columns of a working copy of ``A`` are orthogonalised pairwise until
    every off-diagonal Gram entry is below ``tol`` relative to the column
    norms.  Singular values come out sorted in descending order and the
    sign of each singular pair is chosen so that ``V`` has a nonnegative
    diagonal where possible.

    Returns
    -------
    U, sigma, V : ndarray
    """
    A = _as_square(A)
    n = A.shape[0]
    # unit scaling keeps the Gram products clear of under/overflow
    amax = np.abs(A).max() if A.size else 0.0
    amax = amax if amax > 0 else 1.0
    W = A / amax
    V = np.eye(n)
    # columns below this squared norm are numerically zero
    negligible = (np.finfo(float).eps * max(np.linalg.norm(W), np.finfo(float).tiny)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = W[:, p] @ W[:, p]
                beta = W[:, q] @ W[:, q]
                gamma = W[:, p] @ W[:, q]
                if gamma == 0.0 or min(alpha, beta) <= negligible or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                wp, wq = W[:, p].copy(), W[:, q].copy()
                W[:, p] = c * wp - sn * wq
                W[:, q] = sn * wp + c * wq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - sn * vq
                V[:, q] = sn * vp + c * vq
        if not rotated:
            break
    else:
        raise ConvergenceError(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")

    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, W, V = sigma[order], W[:, order], V[:, order]
    U = np.zeros_like(W)
    scale = max(sigma[0], 1.0) if n else 1.0
    filled = sigma > 1e-15 * scale
    U[:, filled] = W[:, filled] / sigma[filled]
    if not filled.all():
        sigma[~filled] = 0.0
        U = _complete_basis(U, filled)
    for j in range(n):
        if V[j, j] < 0:
            V[:, j] *= -1.0
            U[:, j] *= -1.0
    return U, sigma * amax, V


def sort_spectrum(values):
    """Sort complex values lexicographically by (real, imag)."""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def eig_dense(A, cap=EIG_CAP):
    """Eigenvalues of a real square matrix, sorted by (real, imag).

    Backed by LAPACK's balanced Hessenberg QR (``numpy.linalg.eigvals``).
    """
    A = _as_square(A)
    if A.shape[0] > cap:
        raise CapacityError(f"dimension {A.shape[0]} exceeds eigenvalue cap {cap}")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    return sort_spectrum(np.linalg.eigvals(A))


def lu_factor(A, pivot_tol=1e-14):
    """LU factorisation with partial pivoting, ``P A = L U`` packed in one array.

    Raises
    ------
    SingularityError
        If a pivot falls below ``pivot_tol * max|A|``; the message names the
        zero-based pivot index.
    """
    A = _as_square(A)
    n = A.shape[0]
    LU = A.copy()
    piv = np.arange(n)
    thresh = pivot_tol * max(np.abs(A).max(initial=0.0), np.finfo(float).tiny)
    for k in range(n):
        p = k + int(np.argmax(np.abs(LU[k:, k])))
        if abs(LU[p, k]) <= thresh:
            raise SingularityError(f"singular pivot at index {k} (|pivot|={abs(LU[p, k]):.3e})")
        if p != k:
            LU[[k, p]] = LU[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    return LU, piv


def lu_solve(factors, b):
    LU, piv = factors
    b = np.asarray(b, dtype=float)
    y = b[piv].copy()
    n = LU.shape[0]
    for k in range(n):
        y[k + 1:] -= np.multiply.outer(LU[k + 1:, k], y[k]) if y.ndim > 1 else LU[k + 1:, k] * y[k]
    for k in range(n - 1, -1, -1):
        y[k] = (y[k] - LU[k, k + 1:] @ y[k + 1:]) / LU[k, k]
    return y


def solve_dense(A, b):
    """Solve ``A x = b`` by partial-pivoted LU (``b`` may be 1-D or 2-D)."""
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"rhs has {b.shape[0]} rows, matrix has {A.shape[0]}")
    return lu_solve(lu_factor(A), b)


def det_dense(A):
    """Determinant via LU; returns 0.0 for a numerically singular matrix."""
    A = _as_square(A)
    try:
        LU, piv = lu_factor(A)
    except SingularityError:
        return 0.0
    n = A.shape[0]
    # parity of the row permutation
    seen = np.zeros(n, dtype=bool)
    sign = 1.0
    for i in range(n):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = piv[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign * float(np.prod(np.diag(LU)))
