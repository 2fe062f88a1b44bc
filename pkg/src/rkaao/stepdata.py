"""Per-step right-hand sides: loads, Dirichlet lifts and update corrections.

With Dirichlet elimination, the stage equations of step ``n`` read::

    M k_i + K (v_n + tau sum_j a_ij k_j) = F_i - C_i(v_n) ,

where ``F_i`` collects the load at ``t_n + c_i tau`` and the boundary lifts
of ``k_i`` (from ``dg/dt``) and of ``v_n + tau sum_j a_ij k_j``.  The
interior update ``M v_{n+1} = M v_n + tau M sum_i b_i k_i + beta_{n+1}``
gets a correction ``beta_{n+1}`` that vanishes when the boundary data are
integrated exactly by the quadrature rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem2d import load_full

__all__ = ["HeatStepData", "StokesStepData", "heat_step_data", "stokes_step_data", "stokes_boundary_values"]


@dataclass
class HeatStepData:
    F: np.ndarray        # (s, n_x)
    beta: np.ndarray     # (n_x,) update correction for M v_{n+1}


@dataclass
class StokesStepData:
    Fv: np.ndarray       # (s, n_v)
    Fp: np.ndarray       # (s, n_p), projected onto mean-zero vectors
    beta: np.ndarray     # (n_v,)


def _boundary_eval(fun, X, Y, t, ncomp):
    val = fun(X, Y, t)
    if ncomp == 1:
        return np.broadcast_to(np.asarray(val, dtype=float), X.shape).astype(float)
    return np.stack([np.broadcast_to(np.asarray(c, dtype=float), X.shape) for c in val])


def heat_step_data(d, problem, tableau, t_n, tau):
    grid = d.grid
    X, Y = grid.coords()
    Bd, I = d.boundary, d.interior
    Xb, Yb = X[Bd], Y[Bd]
    M_IB, K_IB = d.lift_blocks()
    A, b, c = tableau.A, tableau.b, tableau.c
    s = tableau.s
    g_n = _boundary_eval(problem.boundary, Xb, Yb, t_n, 1)
    g_next = _boundary_eval(problem.boundary, Xb, Yb, t_n + tau, 1)
    gdot = np.stack([_boundary_eval(problem.boundary_dt, Xb, Yb, t_n + c[i] * tau, 1) for i in range(s)])
    F = np.empty((s, d.n_x))
    for i in range(s):
        load = load_full(grid, lambda x, y, t=t_n + c[i] * tau: problem.forcing(x, y, t))[I]
        stage_bd = g_n + tau * (A[i] @ gdot)
        F[i] = load - M_IB @ gdot[i] - K_IB @ stage_bd
    beta = -(M_IB @ (g_next - g_n - tau * (b @ gdot)))
    return HeatStepData(F, beta)


def stokes_boundary_values(d, problem, t):
    """Boundary velocity, shape ``(2, n_boundary)``."""
    X, Y = d.vgrid.coords()
    Bd = d.vgrid.boundary
    return _boundary_eval(problem.boundary, X[Bd], Y[Bd], t, 2)


def stokes_step_data(d, problem, tableau, t_n, tau):
    vg = d.vgrid
    X, Y = vg.coords()
    Bd, I = vg.boundary, vg.interior
    Xb, Yb = X[Bd], Y[Bd]
    M_IB, K_IB, Bx_B, By_B = d.lift_blocks()
    A, b, c = tableau.A, tableau.b, tableau.c
    s = tableau.s
    g_n = _boundary_eval(problem.boundary, Xb, Yb, t_n, 2)
    g_next = _boundary_eval(problem.boundary, Xb, Yb, t_n + tau, 2)
    gdot = np.stack([_boundary_eval(problem.boundary_dt, Xb, Yb, t_n + c[i] * tau, 2) for i in range(s)])
    Fv = np.empty((s, d.n_v))
    Fp = np.empty((s, d.n_p))
    for i in range(s):
        ti = t_n + c[i] * tau
        loads = [load_full(vg, lambda x, y, k=k: problem.forcing(x, y, ti)[k])[I] for k in range(2)]
        stage_bd = g_n + tau * np.tensordot(A[i], gdot, axes=1)
        Fv[i] = np.concatenate([loads[k] - M_IB @ gdot[i, k] - K_IB @ stage_bd[k] for k in range(2)])
        fp = -(Bx_B @ stage_bd[0] + By_B @ stage_bd[1])
        Fp[i] = fp - fp.mean()
    jump = g_next - g_n - tau * np.tensordot(b, gdot, axes=1)
    beta = -np.concatenate([M_IB @ jump[0], M_IB @ jump[1]])
    return StokesStepData(Fv, Fp, beta)
