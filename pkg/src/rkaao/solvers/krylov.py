"""Restarted GMRES and flexible GMRES with right preconditioning."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionError, DomainError

__all__ = ["KrylovConfig", "SolveStats", "LinearOperator", "as_operator", "gmres", "fgmres"]

BREAKDOWN = 1e-30


@dataclass(frozen=True)
class KrylovConfig:
    restart: int = 10
    rel_tol: float = 1e-8
    max_iters: int = 1000
    flexible: bool = False

    def __post_init__(self):
        if self.restart < 1:
            raise DomainError(f"restart must be >= 1, got {self.restart}")
        if not (0.0 <= self.rel_tol < 1.0):
            raise DomainError(f"rel_tol must lie in [0, 1), got {self.rel_tol}")
        if self.max_iters < 0:
            raise DomainError("max_iters must be nonnegative")


@dataclass
class SolveStats:
    iterations: int = 0
    rel_residual: float = np.nan
    history: list = field(default_factory=list)
    converged: bool = False
    breakdown: bool = False
    hessenberg: list = field(default_factory=list, repr=False)

    def history_csv(self):
        rows = ["iteration,relative_residual"]
        rows += [f"{k},{r:.6g}" for k, r in enumerate(self.history)]
        return "\n".join(rows) + "\n"


class LinearOperator:
    """A callable ``x -> A x`` with a known dimension."""

    def __init__(self, apply, n, label=""):
        self._apply = apply
        self.n = int(n)
        self.label = label

    @property
    def shape(self):
        return (self.n, self.n)

    def __call__(self, x):
        return self._apply(x)

    def __matmul__(self, x):
        return self._apply(x)


def as_operator(A, n=None):
    if A is None:
        return None
    if isinstance(A, LinearOperator):
        return A
    if callable(A) and not hasattr(A, "shape"):
        if n is None:
            raise DimensionError("dimension required for a bare callable")
        return LinearOperator(A, n)
    if callable(A):
        return LinearOperator(A, A.shape[0])
    return LinearOperator(lambda x, A=A: A @ x, A.shape[0])


def _gmres(A, b, M, cfg, x0, keep_hessenberg):
    b = np.asarray(b, dtype=float)
    n = b.size
    A = as_operator(A, n)
    M = as_operator(M, n)
    if A.n != n:
        raise DimensionError(f"operator of size {A.n} applied to rhs of size {n}")
    precond = (lambda v: v) if M is None else M
    m = cfg.restart
    stats = SolveStats()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        stats.rel_residual, stats.converged = 0.0, True
        stats.history.append(0.0)
        return np.zeros(n), stats
    r = b - A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    stats.history.append(beta / bnorm)
    total = 0
    while True:
        if beta / bnorm <= cfg.rel_tol or total >= cfg.max_iters:
            break
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n)) if cfg.flexible else None
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        V[0] = r / beta
        g[0] = beta
        k = 0
        for j in range(m):
            z = precond(V[j])
            if cfg.flexible:
                Z[j] = z
            w = A(z)
            for i in range(j + 1):
                H[i, j] = w @ V[i]
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            if keep_hessenberg:
                stats.hessenberg.append(H[: j + 2, j].copy())
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            hnext = H[j + 1, j]
            denom = np.hypot(H[j, j], hnext)
            if denom == 0.0:
                stats.breakdown = True
                break
            cs[j], sn[j] = H[j, j] / denom, hnext / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            k = j + 1
            stats.history.append(abs(g[j + 1]) / bnorm)
            if hnext <= BREAKDOWN * max(1.0, beta):
                stats.breakdown = True
                break
            V[j + 1] = w / hnext
            if abs(g[j + 1]) / bnorm <= cfg.rel_tol or total >= cfg.max_iters:
                break
        if k == 0:
            break
        y = np.zeros(k)
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:]) / H[i, i]
        x += (y @ Z[:k]) if cfg.flexible else precond(y @ V[:k])
        r = b - A(x)
        beta = np.linalg.norm(r)
        if stats.breakdown:
            break
    stats.iterations = total
    stats.rel_residual = float(beta / bnorm)
    stats.converged = bool(stats.rel_residual <= cfg.rel_tol) or (stats.breakdown and stats.rel_residual <= max(cfg.rel_tol, 1e-12))
    return x, stats


def gmres(A, b, M=None, cfg=None, x0=None, keep_hessenberg=False, **kw):
    """Restarted GMRES, right-preconditioned by ``M`` (an approximate inverse).

    ``A`` and ``M`` may be matrices, :class:`LinearOperator` instances or
    callables.  Iterations count Arnoldi steps over all restart cycles.
    Keyword overrides (``restart``, ``rel_tol``, ``max_iters``) patch ``cfg``.

    Returns
    -------
    x : ndarray
    stats : SolveStats
    """
    cfg = _patched(cfg, flexible=False, **kw)
    return _gmres(A, b, M, cfg, x0, keep_hessenberg)


def fgmres(A, b, M=None, cfg=None, x0=None, keep_hessenberg=False, **kw):
    """Flexible GMRES: ``M`` may change between Arnoldi steps (e.g. an inner Krylov solve)."""
    cfg = _patched(cfg, flexible=True, **kw)
    return _gmres(A, b, M, cfg, x0, keep_hessenberg)


def _patched(cfg, flexible, **kw):
    cfg = cfg or KrylovConfig()
    fields = dict(restart=cfg.restart, rel_tol=cfg.rel_tol, max_iters=cfg.max_iters, flexible=flexible)
    fields.update(kw)
    return KrylovConfig(**fields)
