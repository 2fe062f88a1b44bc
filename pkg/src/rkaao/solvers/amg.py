"""Classical (Ruge--Stuben) algebraic multigrid as a fixed linear approximate inverse."""
from __future__ import annotations

import numpy as np
import pyamg
import scipy.sparse as sp

__all__ = ["AMGSolver"]


class AMGSolver:
    """``cycles`` V-cycles from a zero guess, symmetric Gauss--Seidel smoothing.

    Each cycle is applied as a correction ``x += V(b - A x)`` so the map
    ``b -> x`` stays linear (no internal stopping test).
    """

    def __init__(self, A, cycles=2, smooth=2):
        self.A = sp.csr_matrix(A)
        smoother = ("gauss_seidel", {"sweep": "symmetric", "iterations": int(smooth)})
        self.hierarchy = pyamg.ruge_stuben_solver(self.A, presmoother=smoother, postsmoother=smoother)
        self.cycles = int(cycles)

    @property
    def n(self):
        return self.A.shape[0]

    def _cycle(self, r):
        return self.hierarchy.solve(r, x0=np.zeros_like(r), maxiter=1, tol=1e-300, cycle="V")

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            return np.column_stack([self(b[:, j]) for j in range(b.shape[1])])
        x = self._cycle(b)
        for _ in range(1, self.cycles):
            x += self._cycle(b - self.A @ x)
        return x
