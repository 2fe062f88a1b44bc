"""Runge--Kutta stage systems and their preconditioners.

Heat stage matrix: ``I_s kron M + tau A kron K``.  The SVD preconditioner
``P_RK = (U kron I)(I kron M + tau Sigma kron K)(V^T kron I)`` is inverted
with one decoupled block solve per singular value; ``P_MNS`` keeps the
diagonal ``M + tau a_ii K`` blocks instead.

Stokes stage matrix (unknowns ``[k^v; k^p]``, each stage-major)::

    [ I kron M_v + tau A kron K_v   tau A kron B^T ]
    [ tau A kron B                  -tau^2 gamma A^2 kron M_p ]

with ``gamma = 0`` for the exact (singular) block.  Its preconditioner is
block lower triangular in SVD coordinates, with the pressure Schur
complement replaced by a commutator approximation built from ``M_p`` and
a pinned ``K_p``.

Inner policies: ``"mg"`` (2 geometric V-cycles for shifted stiffness
blocks, 20 Chebyshev steps for mass blocks), ``"amg"`` (same, with
classical algebraic V-cycles) or ``"exact"`` (sparse LU).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dense_core import eig_dense, solve_dense
from .exceptions import DimensionError, DomainError
from .kron_ops import IDENTITY, KronOperator, coupling_transform
from .solvers import AMGSolver, ChebyshevSolver, KrylovConfig, LinearOperator, MultigridSolver, gmres
from .tableaux import rk_factorization

__all__ = [
    "HeatStageSystem",
    "StokesStageSystem",
    "apply_prk_heat_inverse",
    "apply_pmns_inverse",
    "build_stokes_schur_approx",
    "apply_stokes_prk_inverse",
    "perturbed_theta",
    "POLICIES",
    "prk_spectrum",
]

POLICIES = ("mg", "amg", "exact")


def _check_policy(policy):
    if policy not in POLICIES:
        raise DomainError(f"inner policy must be one of {POLICIES}, got {policy!r}")


def _shifted_solver(hierarchy, M, K, coef, policy):
    """Approximate inverse of ``M + coef*K`` (``M`` may be ``None``)."""
    A = K * coef if M is None else M + coef * K
    if policy == "exact":
        lu = spla.splu(sp.csc_matrix(A))
        return lu.solve
    if policy == "amg":
        return AMGSolver(A, cycles=2, smooth=2)
    mass = 0.0 if M is None else 1.0
    return MultigridSolver.from_hierarchy(hierarchy, mass, coef, cycles=2, smooth=2)


def _mass_solver(M, policy):
    if policy == "exact":
        return spla.splu(sp.csc_matrix(M)).solve
    return ChebyshevSolver(M, steps=20)


class HeatStageSystem:
    """Stage system ``I_s kron M + tau A kron K`` for one time step.

    Parameters
    ----------
    tableau : ButcherTableau
    tau : float
    disc : HeatDiscretization (anything with ``M``, ``K``, ``hierarchy``)
    policy : {"mg", "amg", "exact"}
    """

    def __init__(self, tableau, tau, disc, policy="mg"):
        _check_policy(policy)
        self.tableau = tableau
        self.factors = rk_factorization(tableau)
        self.tau = float(tau)
        self.disc = disc
        self.policy = policy
        self.M, self.K = disc.M, disc.K
        self.s = tableau.s
        self.n_x = self.M.shape[0]
        self.operator = KronOperator([(np.eye(self.s), self.M, 1.0), (tableau.A, self.K, self.tau)])
        self._prk_blocks = None
        self._pmns_blocks = None

    @property
    def n(self):
        return self.s * self.n_x

    def apply(self, x):
        return self.operator.apply(x)

    def _blocks(self, coefs):
        cache = {}
        out = []
        for c in coefs:
            key = round(float(c), 15)
            if key not in cache:
                cache[key] = _shifted_solver(self.disc.hierarchy, self.M, self.K, self.tau * c, self.policy)
            out.append(cache[key])
        return out

    @property
    def prk_blocks(self):
        if self._prk_blocks is None:
            self._prk_blocks = self._blocks(self.factors.sigma)
        return self._prk_blocks

    @property
    def pmns_blocks(self):
        if self._pmns_blocks is None:
            diag = np.diag(self.tableau.A)
            if np.any(diag < 0.0):
                raise DomainError(f"negative diagonal coefficient {diag.min():.3g} makes an indefinite block")
            self._pmns_blocks = self._blocks(diag)
        return self._pmns_blocks

    def prk_forward(self, x):
        """``P_RK x`` (used for roundtrip checks)."""
        f = self.factors
        y = coupling_transform(f.V.T, x).reshape(self.s, self.n_x)
        z = np.stack([self.M @ y[i] + self.tau * f.sigma[i] * (self.K @ y[i]) for i in range(self.s)])
        return coupling_transform(f.U, z.ravel())

    def preconditioner(self, kind="prk"):
        if kind == "prk":
            return LinearOperator(lambda r: apply_prk_heat_inverse(self, r), self.n, "P_RK^-1")
        if kind == "pmns":
            return LinearOperator(lambda r: apply_pmns_inverse(self, r), self.n, "P_MNS^-1")
        raise DomainError(f"unknown heat stage preconditioner {kind!r}")

    def solve(self, rhs, kind="prk", cfg=None, **kw):
        """GMRES on the stage system; returns ``(k, stats)``."""
        A = LinearOperator(self.apply, self.n, "stage")
        return gmres(A, rhs, self.preconditioner(kind), cfg=cfg or KrylovConfig(), **kw)

    def to_dense(self):
        return self.operator.to_dense()


def apply_prk_heat_inverse(sys, r):
    """``(V kron I) blockdiag((M + tau sigma_i K)^-1) (U^T kron I) r``."""
    r = np.asarray(r, dtype=float)
    if r.size != sys.n:
        raise DimensionError(f"residual has length {r.size}, expected {sys.n}")
    f = sys.factors
    y = coupling_transform(f.U.T, r).reshape(sys.s, sys.n_x)
    z = np.empty_like(y)
    for i, solve in enumerate(sys.prk_blocks):
        z[i] = solve(y[i])
    return coupling_transform(f.V, z.ravel())


def apply_pmns_inverse(sys, r):
    """Block-diagonal solve with ``M + tau a_ii K``."""
    r = np.asarray(r, dtype=float)
    if r.size != sys.n:
        raise DimensionError(f"residual has length {r.size}, expected {sys.n}")
    y = r.reshape(sys.s, sys.n_x)
    return np.concatenate([solve(y[i]) for i, solve in enumerate(sys.pmns_blocks)])


class PinnedStiffness:
    """``K_p`` with one node decoupled: its row and column are replaced by the diagonal entry."""

    def __init__(self, K_p, pin, hierarchy, policy):
        n = K_p.shape[0]
        if not (0 <= pin < n):
            raise DomainError(f"pin index {pin} outside [0, {n})")
        self.pin = pin
        self.n = n
        self.free = np.setdiff1d(np.arange(n), [pin])
        self.diag = float(K_p[pin, pin])
        self.K_ff = K_p[self.free][:, self.free].tocsr()
        if policy == "exact" or (policy == "mg" and pin != 0):
            self._solve = spla.splu(sp.csc_matrix(self.K_ff)).solve
        else:
            self._solve = _shifted_solver(hierarchy, None, self.K_ff, 1.0, policy)

    def matvec(self, x):
        y = np.empty_like(x)
        y[self.free] = self.K_ff @ x[self.free]
        y[self.pin] = self.diag * x[self.pin]
        return y

    def solve(self, b):
        x = np.empty_like(b)
        x[self.free] = self._solve(b[self.free])
        x[self.pin] = b[self.pin] / self.diag
        return x

    def to_dense(self):
        D = np.zeros((self.n, self.n))
        D[np.ix_(self.free, self.free)] = self.K_ff.toarray()
        D[self.pin, self.pin] = self.diag
        return D


class StokesStageSystem:
    """Taylor--Hood stage system with optional ``gamma`` perturbation of the (2,2) block.

    ``apply`` is the exact (singular) matrix; ``apply_perturbed`` adds
    ``-tau^2 gamma (A^2 kron M_p)``.
    """

    def __init__(self, tableau, tau, disc, gamma=1e-4, policy="mg"):
        _check_policy(policy)
        if gamma < 0:
            raise DomainError("gamma must be nonnegative")
        self.tableau = tableau
        self.factors = rk_factorization(tableau)
        self.tau = float(tau)
        self.disc = disc
        self.gamma = float(gamma)
        self.policy = policy
        self.s = tableau.s
        self.n_v, self.n_p, self.n_q = disc.n_v, disc.n_p, disc.n_q
        A = tableau.A
        self.A2 = A @ A
        self.vel_op = KronOperator([(np.eye(self.s), disc.M_v, 1.0), (A, disc.K_v, self.tau)])
        self.grad_op = KronOperator([(A, disc.B.T.tocsr(), self.tau)])
        self.div_op = KronOperator([(A, disc.B, self.tau)])
        self.pert_op = KronOperator([(self.A2, disc.M_p, -self.tau ** 2 * self.gamma)])
        self._vel_blocks = None
        self._mp = None
        self._kp = None

    @property
    def n(self):
        return self.s * (self.n_v + self.n_p)

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.n:
            raise DimensionError(f"vector has length {x.size}, expected {self.n}")
        return x[: self.s * self.n_v], x[self.s * self.n_v:]

    def apply(self, x, gamma=0.0):
        kv, kp = self.split(x)
        top = self.vel_op @ kv + self.grad_op @ kp
        bot = self.div_op @ kv
        if gamma:
            bot = bot - self.tau ** 2 * gamma * KronOperator([(self.A2, self.disc.M_p, 1.0)]).apply(kp)
        return np.concatenate([top, bot])

    def apply_perturbed(self, x):
        kv, kp = self.split(x)
        return np.concatenate([self.vel_op @ kv + self.grad_op @ kp, self.div_op @ kv + self.pert_op @ kp])

    def perturbation_factored(self, kp):
        """``-tau^2 (A kron I)(gamma I kron M_p)(A kron I) kp``."""
        A = self.tableau.A
        y = coupling_transform(A, kp).reshape(self.s, self.n_p)
        y = self.gamma * (self.disc.M_p @ y.T).T
        return -self.tau ** 2 * coupling_transform(A, y.ravel())

    # inner solvers ----------------------------------------------------
    @property
    def vel_blocks(self):
        if self._vel_blocks is None:
            d = self.disc
            self._vel_blocks = [
                _shifted_solver(d.v_hierarchy, d.Mq, d.Kq, self.tau * sg, self.policy) for sg in self.factors.sigma
            ]
        return self._vel_blocks

    def vel_block_solve(self, i, y):
        solve = self.vel_blocks[i]
        y = y.reshape(2, self.n_q)
        return np.concatenate([solve(y[0]), solve(y[1])])

    @property
    def mp_solver(self):
        if self._mp is None:
            self._mp = _mass_solver(self.disc.M_p, self.policy)
        return self._mp

    @property
    def kp_pinned(self):
        if self._kp is None:
            self._kp = PinnedStiffness(self.disc.K_p, self.disc.pin, self.disc.p_hierarchy, self.policy)
        return self._kp

    def schur_int_inverse(self, x):
        """``(I kron M_p)^-1 (I kron M_p + tau A kron K_p)(I kron K_p)^-1 x`` with pinned ``K_p``."""
        s, n_p = self.s, self.n_p
        X = x.reshape(s, n_p)
        Y = np.stack([self.kp_pinned.solve(X[i]) for i in range(s)])
        KY = np.stack([self.kp_pinned.matvec(Y[i]) for i in range(s)])
        Z = (self.disc.M_p @ Y.T).T + self.tau * (self.tableau.A @ KY)
        return np.concatenate([self.mp_solver(Z[i]) for i in range(s)])

    def schur_int_forward(self, x):
        """``(I kron K_p)(I kron M_p + tau A kron K_p)^-1 (I kron M_p) x`` (dense inner solve; oracle use)."""
        s, n_p = self.s, self.n_p
        Kp = self.kp_pinned.to_dense()
        Mp = self.disc.M_p.toarray()
        inner = np.kron(np.eye(s), Mp) + self.tau * np.kron(self.tableau.A, Kp)
        y = np.linalg.solve(inner, np.kron(np.eye(s), Mp) @ x)
        return np.kron(np.eye(s), Kp) @ y

    def preconditioner(self):
        return LinearOperator(lambda r: apply_stokes_prk_inverse(self, r), self.n, "P~_RK^-1")

    def solve(self, rhs, cfg=None, perturbed=False, **kw):
        A = LinearOperator(self.apply_perturbed if perturbed else self.apply, self.n, "stokes stage")
        return gmres(A, rhs, self.preconditioner(), cfg=cfg or KrylovConfig(), **kw)

    def to_dense(self, perturbed=False):
        d = self.disc
        A = self.tableau.A
        s = self.s
        top = np.hstack([np.kron(np.eye(s), d.M_v.toarray()) + self.tau * np.kron(A, d.K_v.toarray()),
                         self.tau * np.kron(A, d.B.T.toarray())])
        bl = self.tau * np.kron(A, d.B.toarray())
        br = -self.tau ** 2 * self.gamma * np.kron(self.A2, d.M_p.toarray()) if perturbed else np.zeros((s * self.n_p,) * 2)
        return np.vstack([top, np.hstack([bl, br])])


def build_stokes_schur_approx(sys):
    """Linear operator applying ``S~_RK^-1 = -tau^-2 (A^-1 kron I) S~_int^-1 (A^-1 kron I)``."""
    f = sys.factors
    Ainv = f.A_inverse()

    def apply(w):
        y = coupling_transform(Ainv, w)
        y = sys.schur_int_inverse(y)
        return -coupling_transform(Ainv, y) / sys.tau ** 2

    return LinearOperator(apply, sys.s * sys.n_p, "S~_RK^-1")


def apply_stokes_prk_inverse(sys, r):
    """Inverse of ``(U kron I) P~_int (V^T kron I)`` (block lower-triangular ``P~_int``)."""
    f = sys.factors
    s, n_v, n_p = sys.s, sys.n_v, sys.n_p
    rv, rp = sys.split(r)
    yv = coupling_transform(f.U.T, rv).reshape(s, n_v)
    yp = coupling_transform(f.U.T, rp).reshape(s, n_p)
    zv = np.stack([sys.vel_block_solve(i, yv[i]) for i in range(s)])
    Bz = (sys.disc.B @ zv.T).T
    w = yp - sys.tau * f.sigma[:, None] * Bz
    # Schur block of P~_int: -tau^2 (Sigma V^T kron I) S~_int (U Sigma kron I)
    t = coupling_transform(f.V / f.sigma[None, :], w.ravel())
    t = sys.schur_int_inverse(t)
    zp = -coupling_transform(f.U.T / f.sigma[:, None], t) / sys.tau ** 2
    return np.concatenate([coupling_transform(f.V, zv.ravel()), coupling_transform(f.V, zp)])


def perturbed_theta(sys):
    """Forward operator of the perturbed stage block."""
    return LinearOperator(sys.apply_perturbed, sys.n, "Theta~")


def prk_spectrum(tableau, tau, disc):
    """Eigenvalues of ``P_RK^-1 (I kron M + tau A kron K)`` from dense matrices.

    Intended for small discretizations only (dense ``s*n_x`` square solves).
    """
    sys = HeatStageSystem(tableau, tau, disc, policy="exact")
    f = sys.factors
    M, K = disc.M.toarray(), disc.K.toarray()
    P = np.kron(f.U, np.eye(sys.n_x)) @ (np.kron(np.eye(sys.s), M) + tau * np.kron(np.diag(f.sigma), K)) @ np.kron(f.V.T, np.eye(sys.n_x))
    return eig_dense(solve_dense(P, sys.to_dense()))
