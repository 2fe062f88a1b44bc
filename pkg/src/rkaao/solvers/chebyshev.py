"""Chebyshev semi-iteration with Jacobi splitting for s.p.d. (mass) matrices."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..exceptions import DomainError

__all__ = ["ChebyshevSolver", "chebyshev_mass_solve", "jacobi_spectral_bounds", "chebyshev_bound"]

LANCZOS_STEPS = 30
WIDEN = 0.05


def _start_vector(n):
    i = np.arange(n, dtype=float)
    return 1.0 + np.sin(0.7 * i) + np.cos(1.9 * i + 0.3)


def jacobi_spectral_bounds(M, steps=LANCZOS_STEPS, widen=WIDEN):
    """Estimated ``[lmin, lmax]`` of ``diag(M)^-1 M``, widened by ``widen``.

    Extremal Ritz values of ``steps`` Lanczos steps on the symmetrically
    scaled matrix ``D^-1/2 M D^-1/2`` (full reorthogonalization).
    """
    d = M.diagonal()
    n = d.size
    s = 1.0 / np.sqrt(d)
    op = lambda v: s * (M @ (s * v))  # noqa: E731
    q = _start_vector(n)
    Q = [q / np.linalg.norm(q)]
    alpha, beta = [], []
    for k in range(min(steps, n)):
        w = op(Q[k])
        alpha.append(w @ Q[k])
        for qj in Q:
            w -= (w @ qj) * qj
        nb = np.linalg.norm(w)
        if nb <= 1e-12 * abs(alpha[-1]) or k == min(steps, n) - 1:
            break
        beta.append(nb)
        Q.append(w / nb)
    T = np.diag(alpha) + np.diag(beta[: len(alpha) - 1], 1) + np.diag(beta[: len(alpha) - 1], -1)
    ritz = np.linalg.eigvalsh(T)
    return ritz[0] * (1.0 - widen), ritz[-1] * (1.0 + widen)


def chebyshev_bound(lmin, lmax, k):
    """Error reduction ``2 rho^k / (1 + rho^(2k))`` guaranteed on ``[lmin, lmax]``."""
    kappa = lmax / lmin
    rho = (np.sqrt(kappa) - 1.0) / (np.sqrt(kappa) + 1.0)
    return 2.0 * rho ** k / (1.0 + rho ** (2 * k))


class ChebyshevSolver:
    """Fixed-step Chebyshev approximation of ``M^-1`` (a linear operator).

    Bounds are estimated once at construction unless given explicitly.
    Right-hand sides may be vectors or ``(n, k)`` arrays.
    """

    def __init__(self, M, steps=20, bounds=None):
        self.M = sp.csr_matrix(M)
        self.d = self.M.diagonal()
        if np.any(self.d <= 0.0):
            raise DomainError("Jacobi splitting needs a positive diagonal")
        self.steps = int(steps)
        self.bounds = tuple(bounds) if bounds is not None else jacobi_spectral_bounds(self.M)

    @property
    def n(self):
        return self.d.size

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        dinv = (1.0 / self.d) if b.ndim == 1 else (1.0 / self.d)[:, None]
        x = np.zeros_like(b)
        if self.steps == 0:
            return x
        lmin, lmax = self.bounds
        theta = 0.5 * (lmax + lmin)
        delta = 0.5 * (lmax - lmin)
        sigma = theta / delta
        rho = 1.0 / sigma
        dvec = dinv * b / theta
        x = x + dvec
        for _ in range(1, self.steps):
            rho_new = 1.0 / (2.0 * sigma - rho)
            r = b - self.M @ x
            dvec = rho_new * rho * dvec + (2.0 * rho_new / delta) * (dinv * r)
            x = x + dvec
            rho = rho_new
        return x

    def error_bound(self):
        return chebyshev_bound(*self.bounds, self.steps)


def chebyshev_mass_solve(M, b, steps=20, bounds=None):
    """Approximate ``M^-1 b`` with ``steps`` Chebyshev iterations (zero start)."""
    return ChebyshevSolver(M, steps=steps, bounds=bounds)(b)
