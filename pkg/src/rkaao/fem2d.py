"""Finite elements on uniform quadrilateral grids of the square (-1, 1)^2.

Level ``l`` always means ``2**l`` elements per side.  Scalar Q1/Q2 mass and
stiffness matrices are assembled element by element with tensor Gauss
rules, then Dirichlet nodes are eliminated.  Taylor--Hood Q2-Q1 adds the
divergence matrix ``B`` and a full-grid Q1 pressure mass/stiffness pair.
Each discretization also carries the nested hierarchy used by geometric
multigrid.

Node numbering is lexicographic with ``x`` running fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .exceptions import CapacityError, DomainError

__all__ = [
    "Grid",
    "MGLevel",
    "HeatDiscretization",
    "StokesDiscretization",
    "assemble_heat",
    "assemble_stokes",
    "rhs_heat",
    "error_norms",
    "prolongation_1d",
]

MAX_DOFS = 2_000_000


def _gauss_rule(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _lagrange_1d(p, xi):
    """Values and derivatives of equispaced degree-``p`` Lagrange basis on [0, 1]."""
    nodes = np.linspace(0.0, 1.0, p + 1)
    xi = np.atleast_1d(xi)
    val = np.ones((p + 1, xi.size))
    der = np.zeros((p + 1, xi.size))
    for a in range(p + 1):
        others = [nodes[m] for m in range(p + 1) if m != a]
        denom = np.prod([nodes[a] - o for o in others])
        val[a] = np.prod([xi - o for o in others], axis=0) / denom
        for skip in range(p):
            term = np.ones_like(xi)
            for m, o in enumerate(others):
                if m != skip:
                    term = term * (xi - o)
            der[a] += term / denom
    return val, der


@dataclass(frozen=True)
class Grid:
    """Nodal layout of a degree-``p`` tensor grid with ``ne`` elements per side."""

    degree: int
    ne: int

    @property
    def n1(self):
        return self.degree * self.ne + 1

    @property
    def H(self):
        """Element side length."""
        return 2.0 / self.ne

    @property
    def spacing(self):
        return self.H / self.degree

    @property
    def x1(self):
        return np.linspace(-1.0, 1.0, self.n1)

    def coords(self):
        X, Y = np.meshgrid(self.x1, self.x1, indexing="xy")
        return X.ravel(), Y.ravel()

    @property
    def interior(self):
        i = np.arange(self.n1)
        inner = (i > 0) & (i < self.n1 - 1)
        mask = np.logical_and.outer(inner, inner).ravel()  # [j, i] -> j*n1 + i
        return np.flatnonzero(mask)

    @property
    def boundary(self):
        mask = np.ones(self.n1 * self.n1, dtype=bool)
        mask[self.interior] = False
        return np.flatnonzero(mask)

    def element_dofs(self):
        """Global node indices of each element, shape (ne*ne, (p+1)**2)."""
        p = self.degree
        e = np.arange(self.ne)
        ex, ey = np.meshgrid(e, e, indexing="xy")
        ex, ey = ex.ravel(), ey.ravel()
        a = np.arange(p + 1)
        la, lb = np.meshgrid(a, a, indexing="xy")
        la, lb = la.ravel(), lb.ravel()
        gi = p * ex[:, None] + la[None, :]
        gj = p * ey[:, None] + lb[None, :]
        return gj * self.n1 + gi

    def element_origins(self):
        e = np.arange(self.ne)
        ex, ey = np.meshgrid(e, e, indexing="xy")
        return -1.0 + self.H * ex.ravel(), -1.0 + self.H * ey.ravel()


def _check_size(n):
    if n > MAX_DOFS:
        raise CapacityError(f"{n} unknowns exceed the assembly budget of {MAX_DOFS}")


@lru_cache(maxsize=None)
def _reference_tables(p, nq):
    xq, wq = _gauss_rule(nq)
    val, der = _lagrange_1d(p, xq)
    # 2-D tables over quadrature points (eta outer, xi inner) and local nodes (b outer, a inner)
    phi = np.einsum("bj,ai->baji", val, val).reshape((p + 1) ** 2, nq * nq)
    dphi_dxi = np.einsum("bj,ai->baji", val, der).reshape((p + 1) ** 2, nq * nq)
    dphi_deta = np.einsum("bj,ai->baji", der, val).reshape((p + 1) ** 2, nq * nq)
    w2 = np.outer(wq, wq).ravel()
    return xq, w2, phi, dphi_dxi, dphi_deta


def _scatter(grid_r, grid_c, local):
    dr = grid_r.element_dofs()
    dc = grid_c.element_dofs()
    rows = np.repeat(dr, dc.shape[1], axis=1).ravel()
    cols = np.tile(dc, (1, dr.shape[1])).ravel()
    vals = np.broadcast_to(local.ravel(), (dr.shape[0], local.size)).ravel()
    n_r, n_c = grid_r.n1 ** 2, grid_c.n1 ** 2
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n_r, n_c)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def _nq(p):
    return p + 1


def mass_full(grid):
    """Consistent mass matrix on all nodes of ``grid``."""
    _, w, phi, _, _ = _reference_tables(grid.degree, _nq(grid.degree))
    local = (phi * w) @ phi.T * grid.H ** 2
    return _scatter(grid, grid, local)


def stiffness_full(grid):
    """Laplacian stiffness matrix on all nodes of ``grid``."""
    _, w, _, dx, dy = _reference_tables(grid.degree, _nq(grid.degree))
    # derivative scale 1/H each, area H^2: factors cancel
    local = (dx * w) @ dx.T + (dy * w) @ dy.T
    return _scatter(grid, grid, local)


def divergence_full(pgrid, vgrid):
    """``(B_x, B_y)`` with ``B_c[q, j] = -int psi_q d(phi_j)/dx_c`` (full grids)."""
    nq = 3
    _, w, _, dx, dy = _reference_tables(vgrid.degree, nq)
    psi = _reference_tables(pgrid.degree, nq)[2]
    H = vgrid.H
    Bx = -(psi * w) @ dx.T * H
    By = -(psi * w) @ dy.T * H
    return _scatter(pgrid, vgrid, Bx), _scatter(pgrid, vgrid, By)


def load_full(grid, f, nq=None):
    """``F[m] = int f(x, y) phi_m`` over all nodes, by tensor Gauss quadrature."""
    nq = nq or _nq(grid.degree)
    xq, w, phi, _, _ = _reference_tables(grid.degree, nq)
    x0, y0 = grid.element_origins()
    XQ, YQ = np.meshgrid(xq, xq, indexing="xy")
    px = x0[:, None] + grid.H * XQ.ravel()[None, :]
    py = y0[:, None] + grid.H * YQ.ravel()[None, :]
    fv = np.broadcast_to(np.asarray(f(px, py), dtype=float), px.shape)
    local = (fv * w) @ phi.T * grid.H ** 2
    dofs = grid.element_dofs()
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=grid.n1 ** 2)


def prolongation_1d(degree, ne_coarse):
    """Nodal interpolation from ``ne_coarse`` to ``2*ne_coarse`` elements (all nodes)."""
    p = degree
    nc = p * ne_coarse + 1
    nf = 2 * p * ne_coarse + 1
    P = np.zeros((nf, nc))
    xf = np.linspace(0.0, ne_coarse, nf)  # in units of coarse elements
    for i, x in enumerate(xf):
        e = min(int(np.floor(x)), ne_coarse - 1)
        xi = x - e
        val, _ = _lagrange_1d(p, np.array([xi]))
        for a in range(p + 1):
            if abs(val[a, 0]) > 1e-14:
                P[i, p * e + a] = val[a, 0]
    return P


def _restrict(A, keep_rows, keep_cols=None):
    keep_cols = keep_rows if keep_cols is None else keep_cols
    return A[keep_rows][:, keep_cols].tocsr()


@dataclass
class MGLevel:
    """One level of a geometric hierarchy.

    ``P`` interpolates from the next coarser level to this one (``None`` on
    the coarsest level).  ``M`` and ``K`` are the rediscretized operators.
    """

    level: int
    M: sp.csr_matrix
    K: sp.csr_matrix
    P: sp.csr_matrix | None = None


def _scalar_hierarchy(degree, level, keep):
    """Hierarchy of (M, K, P) for levels 1..level; ``keep(grid)`` selects DoFs."""
    levels = []
    for lv in range(1, level + 1):
        g = Grid(degree, 2 ** lv)
        idx = keep(g)
        M = _restrict(mass_full(g), idx)
        K = _restrict(stiffness_full(g), idx)
        P = None
        if lv > 1:
            gc = Grid(degree, 2 ** (lv - 1))
            P1 = prolongation_1d(degree, gc.ne)
            Pf = sp.csr_matrix(np.kron(P1, P1)) if P1.size < 4e6 else sp.kron(sp.csr_matrix(P1), sp.csr_matrix(P1), "csr")
            P = _restrict(sp.csr_matrix(Pf), idx, keep(gc))
            P.eliminate_zeros()
        levels.append(MGLevel(lv, M, K, P))
    return levels


@dataclass
class HeatDiscretization:
    level: int
    degree: int
    grid: Grid
    M: sp.csr_matrix
    K: sp.csr_matrix
    M_full: sp.csr_matrix = field(repr=False)
    K_full: sp.csr_matrix = field(repr=False)
    hierarchy: list = field(repr=False, default_factory=list)

    @property
    def n_x(self):
        return self.M.shape[0]

    @property
    def h(self):
        """Node spacing: ``2**(1-l)`` for Q1 and ``2**-l`` for Q2."""
        return self.grid.spacing

    @property
    def h_element(self):
        return self.grid.H

    @property
    def interior(self):
        return self.grid.interior

    @property
    def boundary(self):
        return self.grid.boundary

    def coords(self):
        X, Y = self.grid.coords()
        return X[self.interior], Y[self.interior]

    def lift_blocks(self):
        """``(M_IB, K_IB)``: interior rows, boundary columns."""
        I, Bd = self.interior, self.boundary
        return _restrict(self.M_full, I, Bd), _restrict(self.K_full, I, Bd)

    def summary(self):
        return {
            "kind": f"heat Q{self.degree}",
            "level": self.level,
            "n_x": self.n_x,
            "h": self.h,
            "nnz(M)": self.M.nnz,
            "nnz(K)": self.K.nnz,
            "|M|_max": float(abs(self.M).max()),
            "|K|_max": float(abs(self.K).max()),
            "mg_levels": len(self.hierarchy),
        }


def assemble_heat(level, degree):
    """Q1 or Q2 mass and stiffness matrices on interior nodes of level ``level``."""
    level, degree = int(level), int(degree)
    if level < 1:
        raise DomainError(f"level must be >= 1, got {level}")
    if degree not in (1, 2):
        raise DomainError(f"degree must be 1 or 2, got {degree}")
    g = Grid(degree, 2 ** level)
    _check_size(g.n1 ** 2)
    Mf, Kf = mass_full(g), stiffness_full(g)
    I = g.interior
    hier = _scalar_hierarchy(degree, level, lambda gr: gr.interior)
    return HeatDiscretization(level, degree, g, _restrict(Mf, I), _restrict(Kf, I), Mf, Kf, hier)


@dataclass
class StokesDiscretization:
    """Taylor--Hood Q2-Q1 matrices; velocity interior DoFs ordered [x-comp, y-comp]."""

    level: int
    vgrid: Grid
    pgrid: Grid
    Mq: sp.csr_matrix
    Kq: sp.csr_matrix
    M_v: sp.csr_matrix
    K_v: sp.csr_matrix
    B: sp.csr_matrix
    M_p: sp.csr_matrix
    K_p: sp.csr_matrix
    Mq_full: sp.csr_matrix = field(repr=False)
    Kq_full: sp.csr_matrix = field(repr=False)
    Bx_full: sp.csr_matrix = field(repr=False)
    By_full: sp.csr_matrix = field(repr=False)
    pin: int = 0
    v_hierarchy: list = field(repr=False, default_factory=list)
    p_hierarchy: list = field(repr=False, default_factory=list)

    @property
    def n_q(self):
        return self.Mq.shape[0]

    @property
    def n_v(self):
        return self.M_v.shape[0]

    @property
    def n_p(self):
        return self.M_p.shape[0]

    @property
    def h(self):
        return self.vgrid.spacing

    @property
    def h_element(self):
        return self.vgrid.H

    def lift_blocks(self):
        """Interior-row / boundary-column blocks of the scalar Q2 matrices and ``B``."""
        I, Bd = self.vgrid.interior, self.vgrid.boundary
        return (
            _restrict(self.Mq_full, I, Bd),
            _restrict(self.Kq_full, I, Bd),
            self.Bx_full[:, Bd].tocsr(),
            self.By_full[:, Bd].tocsr(),
        )

    def summary(self):
        return {
            "kind": "stokes Q2-Q1",
            "level": self.level,
            "n_v": self.n_v,
            "n_p": self.n_p,
            "h": self.h,
            "nnz(B)": self.B.nnz,
            "|K_v|_max": float(abs(self.K_v).max()),
            "|B|_max": float(abs(self.B).max()),
            "pin": self.pin,
            "mg_levels": len(self.v_hierarchy),
        }


def assemble_stokes(level):
    """Taylor--Hood Q2-Q1 Stokes matrices with Dirichlet velocity on the whole boundary."""
    level = int(level)
    if level < 2:
        raise DomainError(f"Stokes level must be >= 2, got {level}")
    vg, pg = Grid(2, 2 ** level), Grid(1, 2 ** level)
    _check_size(2 * vg.n1 ** 2 + pg.n1 ** 2)
    Mqf, Kqf = mass_full(vg), stiffness_full(vg)
    Bxf, Byf = divergence_full(pg, vg)
    I = vg.interior
    Mq, Kq = _restrict(Mqf, I), _restrict(Kqf, I)
    B = sp.hstack([Bxf[:, I], Byf[:, I]], format="csr")
    B.eliminate_zeros()
    pin = 0

    def keep_unpinned(gr):
        return np.arange(1, gr.n1 ** 2)

    return StokesDiscretization(
        level=level, vgrid=vg, pgrid=pg, Mq=Mq, Kq=Kq,
        M_v=sp.block_diag([Mq, Mq], format="csr"), K_v=sp.block_diag([Kq, Kq], format="csr"),
        B=B, M_p=mass_full(pg), K_p=stiffness_full(pg),
        Mq_full=Mqf, Kq_full=Kqf, Bx_full=Bxf, By_full=Byf, pin=pin,
        v_hierarchy=_scalar_hierarchy(2, level, lambda gr: gr.interior),
        p_hierarchy=_scalar_hierarchy(1, level, keep_unpinned),
    )


def rhs_heat(d, problem, t, nq=None):
    """Load and Dirichlet data of the heat problem at time ``t``.

    Returns
    -------
    f : ndarray
        ``int f(., t) phi_m`` on interior nodes.
    g : ndarray
        Boundary values of the solution (lift for ``v``).
    g_dt : ndarray
        Boundary values of its time derivative (lift for the stages).
    """
    F = load_full(d.grid, lambda x, y: problem.forcing(x, y, t), nq=nq)
    X, Y = d.grid.coords()
    Bd = d.boundary
    g = np.broadcast_to(problem.boundary(X[Bd], Y[Bd], t), Bd.shape).astype(float)
    g_dt = np.broadcast_to(problem.boundary_dt(X[Bd], Y[Bd], t), Bd.shape).astype(float)
    return F[d.interior], g, g_dt


def scaled_linf_error(v, v_exact):
    """Relative error at the entry of largest absolute error; flags a zero reference."""
    diff = np.abs(np.asarray(v) - np.asarray(v_exact))
    j = int(np.argmax(diff))
    ref = abs(v_exact[j])
    if ref == 0.0:
        return float(diff[j]), True
    return float(diff[j] / ref), False


def pressure_mean_shift(p, M_p):
    """Subtract the ``M_p``-weighted mean of ``p``."""
    w = M_p @ np.ones(M_p.shape[0])
    return p - (w @ p) / w.sum()


def error_norms(trajectory, problem, d):
    """Discretization errors of a trajectory against the exact solution.

    Heat: max over time nodes of the scaled l-infinity error.  Stokes: the
    max over time nodes of the ``K_v``-energy norm of the velocity error and
    the ``M_p`` norm of the mean-shifted pressure error.

    Returns
    -------
    v_error, p_error, flags : float, float or None, dict
    """
    flags = {"absolute_fallback": False}
    if isinstance(d, HeatDiscretization):
        X, Y = d.coords()
        worst = 0.0
        for t, v in zip(trajectory.times, trajectory.v):
            e, fallback = scaled_linf_error(v, problem.exact(X, Y, t) * np.ones_like(X))
            flags["absolute_fallback"] |= fallback
            worst = max(worst, e)
        return worst, None, flags
    X, Y = d.vgrid.coords()
    I = d.vgrid.interior
    Xp, Yp = d.pgrid.coords()
    v_err = p_err = 0.0
    for t, v, p in zip(trajectory.times, trajectory.v, trajectory.p):
        ux, uy = problem.velocity(X[I], Y[I], t)
        e = v - np.concatenate([ux, uy])
        v_err = max(v_err, float(np.sqrt(max(e @ (d.K_v @ e), 0.0))))
        ep = pressure_mean_shift(p, d.M_p) - pressure_mean_shift(problem.pressure(Xp, Yp, t), d.M_p)
        p_err = max(p_err, float(np.sqrt(max(ep @ (d.M_p @ ep), 0.0))))
    return v_err, p_err, flags
