"""Geometric multigrid V-cycles with symmetric Gauss--Seidel smoothing."""
from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp

from ..dense_core import lu_factor, lu_solve
from ..exceptions import DimensionError

__all__ = ["MultigridSolver", "mg_vcycle_solve", "symmetric_gauss_seidel"]


@numba.njit(cache=True, nogil=True)
def _sgs_kernel(indptr, indices, data, diag, b, x, sweeps):
    n = b.shape[0]
    for _ in range(sweeps):
        for i in range(n):
            acc = b[i]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    acc -= data[p] * x[j]
            x[i] = acc / diag[i]
        for i in range(n - 1, -1, -1):
            acc = b[i]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    acc -= data[p] * x[j]
            x[i] = acc / diag[i]


def symmetric_gauss_seidel(A, b, x, sweeps=1):
    """In-place lexicographic forward-then-backward Gauss--Seidel sweeps."""
    A = A if sp.isspmatrix_csr(A) else sp.csr_matrix(A)
    _sgs_kernel(A.indptr, A.indices, A.data, A.diagonal(), np.ascontiguousarray(b, dtype=float), x, int(sweeps))
    return x


class MultigridSolver:
    """``cycles`` V-cycles from a zero initial guess; a fixed linear operator.

    Parameters
    ----------
    matrices : list of sparse matrices, coarsest first
    prolongations : list, ``prolongations[k]`` maps level ``k-1`` to ``k``
        (entry 0 is ignored).
    """

    def __init__(self, matrices, prolongations, cycles=2, smooth=2):
        if len(matrices) != len(prolongations):
            raise DimensionError("one prolongation slot per level is required")
        self.A = [sp.csr_matrix(A) for A in matrices]
        self.P = [None] + [sp.csr_matrix(P) for P in prolongations[1:]]
        self.R = [None] + [P.T.tocsr() for P in self.P[1:]]
        for k in range(1, len(self.A)):
            if self.P[k].shape != (self.A[k].shape[0], self.A[k - 1].shape[0]):
                raise DimensionError(f"prolongation {k} has shape {self.P[k].shape}")
        self.cycles = int(cycles)
        self.smooth = int(smooth)
        self._coarse = lu_factor(self.A[0].toarray())

    @classmethod
    def from_hierarchy(cls, hierarchy, mass_coef=1.0, stiff_coef=1.0, **kw):
        """Rediscretized ``mass_coef*M_l + stiff_coef*K_l`` on every level."""
        mats = [mass_coef * lv.M + stiff_coef * lv.K for lv in hierarchy]
        return cls(mats, [lv.P for lv in hierarchy], **kw)

    @property
    def n(self):
        return self.A[-1].shape[0]

    def _vcycle(self, k, b):
        if k == 0:
            return lu_solve(self._coarse, b)
        A = self.A[k]
        x = np.zeros_like(b)
        symmetric_gauss_seidel(A, b, x, self.smooth)
        rc = self.R[k] @ (b - A @ x)
        x += self.P[k] @ self._vcycle(k - 1, rc)
        symmetric_gauss_seidel(A, b, x, self.smooth)
        return x

    def __call__(self, b):
        b = np.asarray(b, dtype=float)
        if b.ndim == 2:
            return np.column_stack([self(b[:, j]) for j in range(b.shape[1])])
        top = len(self.A) - 1
        if top == 0:
            return lu_solve(self._coarse, b)
        x = self._vcycle(top, b)
        for _ in range(1, self.cycles):
            x += self._vcycle(top, b - self.A[top] @ x)
        return x


def mg_vcycle_solve(hierarchy, b, mass_coef=1.0, stiff_coef=1.0, cycles=2):
    """One-off convenience wrapper around :class:`MultigridSolver`."""
    return MultigridSolver.from_hierarchy(hierarchy, mass_coef, stiff_coef, cycles=cycles)(b)
