"""Matrix-free Kronecker-structured operators ``sum_t w_t (C_t kron X_t)``.

Vectors are block-major: block ``i`` (stage index) occupies
``x[i*n:(i+1)*n]``.  Nothing of size ``(s*n)^2`` is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError

__all__ = ["IDENTITY", "KronTerm", "KronOperator", "coupling_transform", "block_combine"]

IDENTITY = "I"
COMPENSATE_ABOVE = 6


def _fsum_combine(C, Z):
    """``C @ Z`` using Neumaier-compensated sums over the ``s`` rows of ``Z``."""
    n = Z.shape[1]
    out = np.empty((C.shape[0], n))
    for i in range(C.shape[0]):
        terms = C[i][:, None] * Z
        acc = np.zeros(n)
        comp = np.zeros(n)
        for t in terms:
            y = acc + t
            bp = y - acc
            comp += (acc - (y - bp)) + (t - bp)
            acc = y
        out[i] = acc + comp
    return out


def block_combine(C, Z):
    """``(C kron I) z`` for ``Z`` holding the blocks of ``z`` as rows."""
    C = np.asarray(C, dtype=float)
    if C.shape[1] > COMPENSATE_ABOVE:
        return _fsum_combine(C, Z)
    return C @ Z


@dataclass(frozen=True)
class KronTerm:
    C: np.ndarray
    X: object  # sparse/dense matrix or IDENTITY
    weight: float = 1.0


class KronOperator:
    """Sum of weighted Kronecker products acting on block vectors.

    Parameters
    ----------
    terms : iterable of (C, X, weight)
        ``X`` may be a sparse matrix, a dense array or :data:`IDENTITY`.
    n : int, optional
        Block size; required only when every ``X`` is the identity.
    """

    def __init__(self, terms, n=None):
        self.terms = [t if isinstance(t, KronTerm) else KronTerm(np.atleast_2d(np.asarray(t[0], dtype=float)), t[1], float(t[2]) if len(t) > 2 else 1.0) for t in terms]
        if not self.terms:
            raise DimensionError("KronOperator needs at least one term")
        s_out, s_in = self.terms[0].C.shape
        sizes = {X.shape for X in (t.X for t in self.terms) if not _is_identity(X)}
        if n is None and not sizes:
            raise DimensionError("block size is required for identity-only operators")
        n_out = n_in = n
        for k, t in enumerate(self.terms):
            if t.C.shape != (s_out, s_in):
                raise DimensionError(f"term {k}: coupling shape {t.C.shape} differs from {(s_out, s_in)}")
            if not _is_identity(t.X):
                r, c = t.X.shape
                if n_out is None:
                    n_out, n_in = r, c
                if (r, c) != (n_out, n_in):
                    raise DimensionError(f"term {k}: spatial shape {(r, c)} differs from {(n_out, n_in)}")
            elif n_out is not None and n_out != n_in:
                raise DimensionError(f"term {k}: identity in a rectangular operator")
        self.s_out, self.s_in = s_out, s_in
        self.n_out, self.n_in = n_out, n_in

    @property
    def shape(self):
        return (self.s_out * self.n_out, self.s_in * self.n_in)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.shape[1],):
            raise DimensionError(f"operand has shape {x.shape}, expected ({self.shape[1]},)")
        Xb = x.reshape(self.s_in, self.n_in)
        out = np.zeros((self.s_out, self.n_out))
        for t in self.terms:
            Z = Xb if _is_identity(t.X) else (t.X @ Xb.T).T
            out += t.weight * block_combine(t.C, Z)
        return out.ravel()

    __matmul__ = apply

    def __call__(self, x):
        return self.apply(x)

    def to_dense(self):
        """Materialize the operator (oracle use only)."""
        A = np.zeros(self.shape)
        for t in self.terms:
            X = np.eye(self.n_in) if _is_identity(t.X) else (t.X.toarray() if sp.issparse(t.X) else np.asarray(t.X))
            A += t.weight * np.kron(t.C, X)
        return A


def _is_identity(X):
    return isinstance(X, str) and X == IDENTITY


def coupling_transform(C, x):
    """``(C kron I) x`` for a block vector ``x`` with ``C.shape[1]`` blocks."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    x = np.asarray(x, dtype=float)
    s = C.shape[1]
    if C.shape[0] != C.shape[1]:
        raise DimensionError(f"coupling matrix must be square, got {C.shape}")
    if x.size % s:
        raise DimensionError(f"vector of length {x.size} does not split into {s} blocks")
    return block_combine(C, x.reshape(s, -1)).ravel()
