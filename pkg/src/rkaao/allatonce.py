"""All-at-once Runge--Kutta systems and their block-triangular preconditioner.

Unknowns are ``[v_0, ..., v_nt, k_0, ..., k_{nt-1}]``, where each ``v_n``
is a state block (``v`` for heat, ``[v; p]`` for Stokes) and each ``k_n``
stacks the ``s`` stages (Stokes: all velocity stages, then all pressure
stages).  The matrix is::

    [ Phi   Psi1 ]      Phi  : block bidiagonal in the state mass M
    [ Psi2  Theta]      Psi1 : -tau (b^T kron M) on the subdiagonal
                        Psi2 : (e kron D) on the diagonal, D the state operator
                        Theta: I_nt kron (stage matrix)

The preconditioner ``[S Psi1; 0 Theta]`` uses ``S = -blockdiag(M) S_hat``
with ``S_hat`` unit lower bidiagonal, off-diagonal ``-(I - X_hat)``.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import CapacityError, ConvergenceError, DimensionError, DomainError
from .fem2d import HeatDiscretization, StokesDiscretization
from .report import Trajectory
from .solvers import ChebyshevSolver, KrylovConfig, LinearOperator, fgmres, gmres
from .stage_precond import HeatStageSystem, StokesStageSystem
from .stepdata import heat_step_data, stokes_step_data

__all__ = ["AllAtOnceSystem", "AllAtOncePrecond", "assemble_allatonce", "apply_system", "apply_precond_inverse", "solve_allatonce"]

MAX_UNKNOWNS = 20_000_000


class AllAtOnceSystem:
    """Structured all-at-once operator with its right-hand side."""

    def __init__(self, kind, tableau, n_t, tau, disc, stage, rhs=None, t0=0.0):
        self.kind = kind
        self.tableau = tableau
        self.n_t = int(n_t)
        self.tau = float(tau)
        self.t0 = float(t0)
        self.disc = disc
        self.stage = stage
        self.s = tableau.s
        if kind == "heat":
            self.M = disc.M
            self.nv = disc.n_x
        else:
            self.M = sp.block_diag([disc.M_v, disc.M_p], format="csr")
            self.nv = disc.n_v + disc.n_p
        self.ns = stage.n
        self.rhs = rhs

    @property
    def n_state(self):
        return (self.n_t + 1) * self.nv

    @property
    def n(self):
        return self.n_state + self.n_t * self.ns

    @property
    def times(self):
        return self.t0 + self.tau * np.arange(self.n_t + 1)

    # block helpers ----------------------------------------------------
    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.n:
            raise DimensionError(f"vector has length {x.size}, expected {self.n}")
        return x[: self.n_state].reshape(self.n_t + 1, self.nv), x[self.n_state:].reshape(self.n_t, self.ns)

    def contract(self, k):
        """``(b^T kron I) k`` mapped to a state block."""
        b = self.tableau.b
        if self.kind == "heat":
            return b @ k.reshape(self.s, self.nv)
        d = self.disc
        kv = k[: self.s * d.n_v].reshape(self.s, d.n_v)
        kp = k[self.s * d.n_v:].reshape(self.s, d.n_p)
        return np.concatenate([b @ kv, b @ kp])

    def couple(self, v):
        """``(e kron D) v`` mapped to a stage block."""
        if self.kind == "heat":
            return np.tile(self.disc.K @ v, self.s)
        d = self.disc
        vv, pp = v[: d.n_v], v[d.n_v:]
        top = d.K_v @ vv + d.B.T @ pp
        bot = d.B @ vv
        return np.concatenate([np.tile(top, self.s), np.tile(bot, self.s)])

    def stage_apply(self, k):
        return self.stage.apply(k)

    # operators --------------------------------------------------------
    def apply(self, x):
        V, K = self.split(x)
        Y1 = np.empty_like(V)
        Y1[0] = self.M @ V[0]
        for n in range(1, self.n_t + 1):
            Y1[n] = self.M @ (V[n] - V[n - 1] - self.tau * self.contract(K[n - 1]))
        Y2 = np.empty_like(K)
        for n in range(self.n_t):
            Y2[n] = self.couple(V[n]) + self.stage_apply(K[n])
        return np.concatenate([Y1.ravel(), Y2.ravel()])

    def to_dense(self):
        """Materialize the matrix from explicit Kronecker blocks (oracle use)."""
        if self.n > 6000:
            raise CapacityError(f"dense materialization of {self.n} unknowns refused")
        nt, nv, ns, s = self.n_t, self.nv, self.ns, self.s
        M = self.M.toarray()
        b, e = self.tableau.b[None, :], np.ones((s, 1))
        if self.kind == "heat":
            D = self.disc.K.toarray()
            bM = np.kron(b, M)
            eD = np.kron(e, D)
        else:
            d = self.disc
            Mv, Mp = d.M_v.toarray(), d.M_p.toarray()
            Kv, B = d.K_v.toarray(), d.B.toarray()
            bM = np.block([[np.kron(b, Mv), np.zeros((d.n_v, s * d.n_p))],
                           [np.zeros((d.n_p, s * d.n_v)), np.kron(b, Mp)]])
            eD = np.block([[np.kron(e, Kv), np.kron(e, B.T)],
                           [np.kron(e, B), np.zeros((s * d.n_p, d.n_p))]])
        Theta = self.stage.to_dense()
        Phi = np.kron(np.eye(nt + 1), M) - np.kron(np.eye(nt + 1, k=-1), M)
        sub = np.zeros((nt + 1, nt))
        sub[np.arange(1, nt + 1), np.arange(nt)] = 1.0
        Psi1 = -self.tau * np.kron(sub, bM)
        diag = np.zeros((nt, nt + 1))
        diag[np.arange(nt), np.arange(nt)] = 1.0
        Psi2 = np.kron(diag, eD)
        return np.block([[Phi, Psi1], [Psi2, np.kron(np.eye(nt), Theta)]])

    def extract(self, x):
        """Trajectory of states (and stages) from a solution vector."""
        V, K = self.split(x)
        if self.kind == "heat":
            return Trajectory(self.times, [V[n].copy() for n in range(self.n_t + 1)], None, [K[n].copy() for n in range(self.n_t)])
        nvv = self.disc.n_v
        return Trajectory(self.times, [V[n, :nvv].copy() for n in range(self.n_t + 1)],
                          [V[n, nvv:].copy() for n in range(self.n_t + 1)], [K[n].copy() for n in range(self.n_t)])


def apply_system(sys, x):
    return sys.apply(x)


def assemble_allatonce(kind, tableau, disc, problem, n_t, t_f, policy="mg", gamma=1e-4, v_init=None, p_init=None, t0=0.0):
    """Build the all-at-once system on ``(t0, t_f)`` with ``n_t`` steps.

    ``v_init`` (and ``p_init`` for Stokes) default to the exact solution at ``t0``.
    """
    if n_t < 1:
        raise DomainError("n_t must be >= 1")
    tau = (t_f - t0) / n_t
    if kind == "heat":
        if not isinstance(disc, HeatDiscretization):
            raise DomainError("heat systems need a HeatDiscretization")
        stage = HeatStageSystem(tableau, tau, disc, policy=policy)
    elif kind == "stokes":
        if not isinstance(disc, StokesDiscretization):
            raise DomainError("Stokes systems need a StokesDiscretization")
        stage = StokesStageSystem(tableau, tau, disc, gamma=gamma, policy=policy)
    else:
        raise DomainError(f"unknown problem kind {kind!r}")
    sys = AllAtOnceSystem(kind, tableau, n_t, tau, disc, stage, t0=t0)
    if sys.n > MAX_UNKNOWNS:
        raise CapacityError(f"{sys.n} unknowns exceed the budget of {MAX_UNKNOWNS}")
    blocks1 = np.zeros((n_t + 1, sys.nv))
    blocks2 = np.zeros((n_t, sys.ns))
    if kind == "heat":
        if v_init is None:
            X, Y = disc.coords()
            v_init = problem.exact(X, Y, t0) * np.ones_like(X)
        blocks1[0] = disc.M @ v_init
        for n in range(n_t):
            data = heat_step_data(disc, problem, tableau, t0 + n * tau, tau)
            blocks1[n + 1] = data.beta
            blocks2[n] = data.F.ravel()
    else:
        if v_init is None or p_init is None:
            raise DomainError("Stokes systems need initial velocity and pressure")
        blocks1[0] = np.concatenate([disc.M_v @ v_init, disc.M_p @ p_init])
        for n in range(n_t):
            data = stokes_step_data(disc, problem, tableau, t0 + n * tau, tau)
            blocks1[n + 1, : disc.n_v] = data.beta
            blocks2[n] = np.concatenate([data.Fv.ravel(), data.Fp.ravel()])
    sys.rhs = np.concatenate([blocks1.ravel(), blocks2.ravel()])
    return sys


@dataclass
class PhaseTimes:
    theta: float = 0.0
    schur: float = 0.0


class AllAtOncePrecond:
    """Approximate inverse of ``[S Psi1; 0 Theta]``.

    Parameters
    ----------
    inner : {"gmres", "exact"}
        ``"gmres"``: ``inner_iters`` right-preconditioned GMRES steps per
        stage block (P_RK for heat, the Stokes block preconditioner on the
        perturbed block otherwise).  ``"exact"``: sparse LU of each stage
        block (heat) or of the perturbed stage block (Stokes).
    mass : {"chebyshev", "exact"}
    threads : int
        Width of the thread pool used for the per-step stage solves.
    """

    def __init__(self, sys, inner="gmres", inner_iters=5, mass="chebyshev", threads=1):
        if inner not in ("gmres", "exact"):
            raise DomainError(f"inner must be 'gmres' or 'exact', got {inner!r}")
        if mass not in ("chebyshev", "exact"):
            raise DomainError(f"mass must be 'chebyshev' or 'exact', got {mass!r}")
        self.sys = sys
        self.inner = inner
        self.inner_iters = int(inner_iters)
        self.threads = max(1, int(threads))
        self.times = PhaseTimes()
        self.inner_steps = 0
        st = sys.stage
        if sys.kind == "heat":
            self._theta_apply = st.apply
            self._theta_pc = st.preconditioner("prk")
        else:
            self._theta_apply = st.apply_perturbed
            self._theta_pc = st.preconditioner()
        if inner == "exact":
            dense = st.to_dense(perturbed=True) if sys.kind == "stokes" else st.to_dense()
            self._lu = spla.splu(sp.csc_matrix(dense))
        if sys.kind == "heat":
            self._mass = ChebyshevSolver(sys.M) if mass == "chebyshev" else spla.splu(sp.csc_matrix(sys.M)).solve
        else:
            d = sys.disc
            if mass == "chebyshev":
                mq, mp = ChebyshevSolver(d.Mq), ChebyshevSolver(d.M_p)
            else:
                mq, mp = spla.splu(sp.csc_matrix(d.Mq)).solve, spla.splu(sp.csc_matrix(d.M_p)).solve
            nq, nv = d.n_q, d.n_v

            def mass_solve(x):
                return np.concatenate([mq(x[:nq]), mq(x[nq:nv]), mp(x[nv:])])

            self._mass = mass_solve
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        self._theta_op = LinearOperator(self._theta_apply, sys.ns, "stage")
        self._inner_cfg = KrylovConfig(restart=max(10, self.inner_iters), rel_tol=0.0, max_iters=self.inner_iters)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def stage_solve(self, r):
        """Approximate stage-block inverse applied to one step's residual."""
        if self.inner == "exact":
            return self._lu.solve(r)
        x, stats = gmres(self._theta_op, r, self._theta_pc, cfg=self._inner_cfg)
        self.inner_steps += stats.iterations
        return x

    def theta_phase(self, R2, order=None):
        """Independent stage solves for every time step (parallel map)."""
        idx = list(range(R2.shape[0])) if order is None else list(order)
        if self._pool is None:
            results = {n: self.stage_solve(R2[n]) for n in idx}
        else:
            results = dict(zip(idx, self._pool.map(lambda n: self.stage_solve(R2[n]), idx)))
        return np.stack([results[n] for n in range(R2.shape[0])]) if R2.shape[0] else np.zeros_like(R2)

    def x_hat(self, v):
        sys = self.sys
        return sys.tau * sys.contract(self.stage_solve(sys.couple(v)))

    def __call__(self, r):
        sys = self.sys
        R1, R2 = sys.split(r)
        t0 = time.perf_counter()
        K = self.theta_phase(R2)
        t1 = time.perf_counter()
        W = R1.copy()
        for n in range(1, sys.n_t + 1):
            W[n] += sys.tau * (sys.M @ sys.contract(K[n - 1]))
        V = np.empty_like(W)
        V[0] = -self._mass(W[0])
        for n in range(1, sys.n_t + 1):
            prev = V[n - 1]
            V[n] = -self._mass(W[n]) + prev - self.x_hat(prev)
        t2 = time.perf_counter()
        self.times.theta += t1 - t0
        self.times.schur += t2 - t1
        return np.concatenate([V.ravel(), K.ravel()])


def apply_precond_inverse(sys, pc, r):
    return pc(r)


def solve_allatonce(sys, pc, cfg=None):
    """FGMRES on the all-at-once system; returns ``(trajectory, stats, x)``."""
    cfg = cfg or KrylovConfig(restart=10, rel_tol=1e-8, max_iters=500, flexible=True)
    if not cfg.flexible:
        raise DomainError("the all-at-once solve needs the flexible outer method")
    A = LinearOperator(sys.apply, sys.n, "all-at-once")
    x, stats = fgmres(A, sys.rhs, pc, cfg=cfg)
    if not np.all(np.isfinite(x)):
        raise ConvergenceError("all-at-once iterate became non-finite")
    return sys.extract(x), stats, x
