"""Experiment drivers: time-step selection, sequential stepping and all-at-once runs."""
from __future__ import annotations

import math
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .allatonce import AllAtOncePrecond, assemble_allatonce, solve_allatonce
from .exceptions import DomainError
from .fem2d import assemble_heat, assemble_stokes, error_norms, load_full
from .problems import heat_problem, lid_cavity_problem, stokes_problem
from .report import SolveReport, Trajectory
from .solvers import ChebyshevSolver, KrylovConfig, SolveStats
from .stage_precond import HeatStageSystem, StokesStageSystem
from .stepdata import heat_step_data, stokes_boundary_values, stokes_step_data
from .tableaux import Family, make_tableau

__all__ = [
    "choose_nt", "fe_order", "backward_euler_init", "run_sequential", "run_allatonce", "run_experiment",
    "problem_for", "discretize", "resolve_nt", "dof_count",
]


NEGLIGIBLE = 64 * np.finfo(float).eps


def fe_order(kind, degree):
    """Spatial convergence order used to balance the time step."""
    if kind == "stokes":
        return 2
    return {1: 2, 2: 3}[degree]


def choose_nt(t_f, h, q_fe, q_rk):
    """``ceil(t_f * h^(-q_fe/q_rk))``, guarded against round-off just above an integer."""
    if h <= 0 or q_rk <= 0:
        raise DomainError("h and the RK order must be positive")
    raw = t_f * h ** (-q_fe / q_rk)
    near = round(raw)
    if abs(raw - near) <= 1e-9 * max(1.0, raw):
        return max(1, int(near))
    return max(1, math.ceil(raw))


def problem_for(cfg):
    if cfg.problem.startswith("heat"):
        return heat_problem(cfg.final_time)
    if cfg.problem.startswith("stokes"):
        return stokes_problem(cfg.final_time)
    return lid_cavity_problem(cfg.final_time)


def discretize(cfg):
    if cfg.kind == "heat":
        return assemble_heat(cfg.l, cfg.fe_degree)
    return assemble_stokes(cfg.l)


def _krylov(cfg, flexible=False):
    return KrylovConfig(restart=cfg.restart, rel_tol=cfg.tolerance, max_iters=cfg.max_iters, flexible=flexible)


def _heat_initial(d, problem, t):
    X, Y = d.coords()
    return problem.exact(X, Y, t) * np.ones_like(X)


def _stokes_initial_velocity(d, problem, t):
    if problem.exact is None:
        return np.zeros(d.n_v)
    X, Y = d.vgrid.coords()
    I = d.vgrid.interior
    ux, uy = problem.velocity(X[I], Y[I], t)
    return np.concatenate([ux, uy])


def backward_euler_init(d, problem, eps):
    """One backward Euler step over ``(0, eps)`` giving a consistent ``(v, p)``.

    Solves ``[[M_v + eps K_v, B^T], [B, 0]] [v; eps p] = rhs`` by sparse LU
    with the pressure pinned at node ``d.pin``.
    """
    v0 = _stokes_initial_velocity(d, problem, 0.0)
    g0 = stokes_boundary_values(d, problem, 0.0)
    ge = stokes_boundary_values(d, problem, eps)
    M_IB, K_IB, Bx_B, By_B = d.lift_blocks()
    I = d.vgrid.interior
    loads = [load_full(d.vgrid, lambda x, y, k=k: problem.forcing(x, y, eps)[k])[I] for k in range(2)]
    rhs_v = d.M_v @ v0 + np.concatenate(
        [M_IB @ (g0[k] - ge[k]) - eps * (K_IB @ ge[k]) + eps * loads[k] for k in range(2)]
    )
    rhs_p = -(Bx_B @ ge[0] + By_B @ ge[1])
    rhs_p -= rhs_p.mean()
    S = sp.bmat([[d.M_v + eps * d.K_v, d.B.T], [d.B, None]], format="csc")
    keep = np.ones(S.shape[0], dtype=bool)
    keep[d.n_v + d.pin] = False
    sol = np.zeros(S.shape[0])
    sol[keep] = spla.splu(S[keep][:, keep].tocsc()).solve(np.concatenate([rhs_v, rhs_p])[keep])
    return sol[: d.n_v], sol[d.n_v:] / eps


def _stokes_eps(d):
    # mesh size of the Q2 velocity grid (node spacing)
    return d.h ** 2.5


def dof_count(kind, d, s, n_t, all_at_once):
    n = d.n_x if kind == "heat" else d.n_v + d.n_p
    if all_at_once:
        return (n_t + 1) * n + n_t * s * n
    return s * n


def resolve_nt(cfg, d, tab):
    if cfg.nt is not None:
        return cfg.nt
    return choose_nt(cfg.final_time, d.h_element, fe_order(cfg.kind, cfg.fe_degree), tab.order)


def _stage_solve(system, rhs, scale, **kw):
    """Skip GMRES when ``rhs`` is round-off relative to the terms that formed it."""
    if np.linalg.norm(rhs) <= NEGLIGIBLE * scale:
        return np.zeros_like(rhs), SolveStats(iterations=0, rel_residual=0.0, converged=True)
    return system.solve(rhs, **kw)


def _errors(traj, problem, d):
    if problem.exact is None:
        return None, None, {}
    return error_norms(traj, problem, d)


def run_sequential(cfg):
    """Step through time solving one stage system per step with GMRES."""
    tab = make_tableau(Family.parse(cfg.family), cfg.s)
    problem = problem_for(cfg)
    d = discretize(cfg)
    n_t = resolve_nt(cfg, d, tab)
    kcfg = _krylov(cfg)
    b = tab.b
    stage_iters = []
    notes = {}
    start = time.perf_counter()
    if cfg.kind == "heat":
        tau = cfg.final_time / n_t
        t0 = 0.0
        system = HeatStageSystem(tab, tau, d, policy=cfg.inner)
        mass = ChebyshevSolver(d.M) if cfg.inner != "exact" else spla.splu(sp.csc_matrix(d.M)).solve
        v = _heat_initial(d, problem, t0)
        vs, ps = [v], None
        for n in range(n_t):
            data = heat_step_data(d, problem, tab, t0 + n * tau, tau)
            Kv = d.K @ v
            rhs = (data.F - Kv[None, :]).ravel()
            scale = np.linalg.norm(data.F) + np.sqrt(tab.s) * np.linalg.norm(Kv)
            k, st = _stage_solve(system, rhs, scale, kind=cfg.precond, cfg=kcfg)
            stage_iters.append(st.iterations)
            if not st.converged:
                notes["failed_step"] = n
                break
            v = v + tau * (b @ k.reshape(tab.s, d.n_x))
            if np.any(data.beta):
                v = v + mass(data.beta)
            vs.append(v)
    else:
        eps = _stokes_eps(d)
        t0 = eps
        tau = (cfg.final_time - eps) / n_t
        system = StokesStageSystem(tab, tau, d, gamma=cfg.gamma, policy=cfg.inner)
        mass = ChebyshevSolver(d.Mq) if cfg.inner != "exact" else spla.splu(sp.csc_matrix(d.Mq)).solve
        v, p = backward_euler_init(d, problem, eps)
        vs, ps = [v], [p]
        nv, n_p, nq, s = d.n_v, d.n_p, d.n_q, tab.s
        for n in range(n_t):
            data = stokes_step_data(d, problem, tab, t0 + n * tau, tau)
            top = d.K_v @ v + d.B.T @ p
            bot = d.B @ v
            rhs = np.concatenate([(data.Fv - top[None, :]).ravel(), (data.Fp - bot[None, :]).ravel()])
            scale = np.hypot(np.linalg.norm(data.Fv), np.linalg.norm(data.Fp)) + np.sqrt(s) * np.hypot(
                np.linalg.norm(top), np.linalg.norm(bot))
            k, st = _stage_solve(system, rhs, scale, cfg=kcfg)
            stage_iters.append(st.iterations)
            if not st.converged:
                notes["failed_step"] = n
                break
            kv = k[: s * nv].reshape(s, nv)
            kp = k[s * nv:].reshape(s, n_p)
            v = v + tau * (b @ kv)
            if np.any(data.beta):
                v = v + np.concatenate([mass(data.beta[:nq]), mass(data.beta[nq:])])
            p = p + tau * (b @ kp)
            vs.append(v)
            ps.append(p)
    elapsed = time.perf_counter() - start
    converged = "failed_step" not in notes
    times = t0 + tau * np.arange(len(vs))
    traj = Trajectory(times, vs, ps)
    v_err, p_err, flags = _errors(traj, problem, d) if converged else (None, None, {})
    notes.update(flags)
    return SolveReport(
        problem=cfg.problem, family=tab.family.label, s=tab.s, degree=cfg.fe_degree, l=cfg.l, n_t=n_t,
        dof=dof_count(cfg.kind, d, tab.s, n_t, False), outer_iters=None,
        avg_stage_iters=float(np.mean(stage_iters)) if stage_iters else None,
        v_error=v_err, p_error=p_err, t_total_s=elapsed, converged=converged,
        stage_iters=stage_iters, notes=notes,
    ), traj


def run_allatonce(cfg, inner="gmres", inner_iters=5, mass="chebyshev"):
    """Solve every time step at once with preconditioned FGMRES."""
    tab = make_tableau(Family.parse(cfg.family), cfg.s)
    problem = problem_for(cfg)
    d = discretize(cfg)
    n_t = resolve_nt(cfg, d, tab)
    start = time.perf_counter()
    if cfg.kind == "heat":
        system = assemble_allatonce("heat", tab, d, problem, n_t, cfg.final_time, policy=cfg.inner)
    else:
        eps = _stokes_eps(d)
        v0, p0 = backward_euler_init(d, problem, eps)
        system = assemble_allatonce(
            "stokes", tab, d, problem, n_t, cfg.final_time, policy=cfg.inner, gamma=cfg.gamma,
            v_init=v0, p_init=p0, t0=eps,
        )
    pc = AllAtOncePrecond(system, inner=inner, inner_iters=inner_iters, mass=mass, threads=cfg.threads)
    try:
        traj, stats, _ = solve_allatonce(system, pc, _krylov(cfg, flexible=True))
    finally:
        pc.close()
    elapsed = time.perf_counter() - start
    v_err, p_err, flags = _errors(traj, problem, d) if stats.converged else (None, None, {})
    notes = dict(flags)
    if not stats.converged:
        notes["rel_residual"] = stats.rel_residual
    return SolveReport(
        problem=cfg.problem, family=tab.family.label, s=tab.s, degree=cfg.fe_degree, l=cfg.l, n_t=n_t,
        dof=system.n, outer_iters=stats.iterations, avg_stage_iters=None,
        v_error=v_err, p_error=p_err, t_total_s=elapsed, t_theta_s=pc.times.theta, t_schur_s=pc.times.schur,
        converged=stats.converged, residual_history=list(stats.history), notes=notes,
    ), traj


def run_experiment(cfg):
    """Dispatch on ``cfg.problem``; returns ``(report, trajectory)``."""
    return run_allatonce(cfg) if cfg.all_at_once else run_sequential(cfg)
