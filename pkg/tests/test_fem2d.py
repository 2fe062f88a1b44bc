import numpy as np
import pytest
import scipy.sparse as sp
import sympy

from rkaao.dense_core import eig_dense, solve_dense
from rkaao.exceptions import DomainError
from rkaao.fem2d import (
    assemble_heat, assemble_stokes, error_norms, load_full, mass_full, pressure_mean_shift, rhs_heat,
    scaled_linf_error,
)
from rkaao.problems import heat_problem, stokes_problem
from rkaao.report import Trajectory


def _q1_1d(level):
    H = 2.0 / 2 ** level
    n = 2 ** level - 1
    M1 = sp.diags([H / 6, 2 * H / 3, H / 6], [-1, 0, 1], shape=(n, n))
    K1 = sp.diags([-1 / H, 2 / H, -1 / H], [-1, 0, 1], shape=(n, n))
    return M1, K1


def test_sizes():
    assert assemble_heat(3, 1).n_x == 49
    assert assemble_heat(3, 2).n_x == 225
    d = assemble_stokes(3)
    assert (d.n_v, d.n_p) == (450, 81)
    assert 2 * (d.n_v + d.n_p) == 1062
    d4 = assemble_stokes(4)
    assert 2 * (d4.n_v + d4.n_p) == 4422


def test_single_interior_node():
    d = assemble_heat(1, 1)
    assert d.n_x == 1
    assert d.M[0, 0] == pytest.approx(4 / 9, abs=1e-15)
    assert d.K[0, 0] == pytest.approx(8 / 3, abs=1e-15)


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_q1_kronecker_identity(level):
    d = assemble_heat(level, 1)
    M1, K1 = _q1_1d(level)
    assert abs(d.M - sp.kron(M1, M1)).max() <= 1e-13
    assert abs(d.K - (sp.kron(K1, M1) + sp.kron(M1, K1))).max() <= 1e-13


@pytest.mark.parametrize("degree", [1, 2])
def test_mass_partition_of_unity(degree):
    d = assemble_heat(3, degree)
    assert d.M_full.sum() == pytest.approx(4.0, rel=1e-12)
    rows = np.asarray(d.M_full.sum(axis=1)).ravel()
    np.testing.assert_allclose(rows, load_full(d.grid, lambda x, y: np.ones_like(x)), rtol=1e-12)


@pytest.mark.parametrize("degree", [1, 2])
def test_matrices_spd(degree):
    d = assemble_heat(3, degree)
    for A in (d.M, d.K):
        assert abs(A - A.T).max() <= 1e-13 * abs(A).max()
        assert np.linalg.eigvalsh(A.toarray()).min() > 0


@pytest.mark.parametrize("degree", [1, 2])
def test_patch_test_linear(degree):
    d = assemble_heat(3, degree)
    X, Y = d.grid.coords()
    u = 0.3 + 1.7 * X - 0.4 * Y
    _, K_IB = d.lift_blocks()
    r = d.K @ u[d.interior] + K_IB @ u[d.boundary]
    assert np.abs(r).max() <= 1e-11


def test_divergence_of_divergence_free_q2_field_vanishes():
    d = assemble_stokes(3)
    X, Y = d.vgrid.coords()
    r = d.Bx_full @ (Y ** 2 - 3 * X * Y) + d.By_full @ (X ** 2 + 1.5 * Y ** 2)
    assert np.abs(r).max() <= 1e-14


def test_divergence_of_colliding_flow_converges():
    # x*y^3 and x^4 are not in Q2, so only interpolation accuracy is available
    res = []
    for level in (2, 3, 4):
        d = assemble_stokes(level)
        X, Y = d.vgrid.coords()
        res.append(np.abs(d.Bx_full @ (20 * X * Y ** 3) + d.By_full @ (5 * X ** 4 - 5 * Y ** 4)).max())
    rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(rates > 4.5), rates
    assert res[-1] <= 1e-5


def test_divergence_kills_constants_and_sums():
    d = assemble_stokes(3)
    assert np.abs(d.B.T @ np.ones(d.n_p)).max() <= 1e-14
    # -int div(phi) over the domain for the unit x-field on all nodes
    X, _ = d.vgrid.coords()
    assert (d.Bx_full @ X).sum() == pytest.approx(-4.0, rel=1e-13)


def test_pressure_stiffness_kernel_is_constants():
    d = assemble_stokes(2)
    ev = np.linalg.eigvalsh(d.K_p.toarray())
    assert abs(ev[0]) <= 1e-13 and ev[1] > 1e-3
    assert np.abs(d.K_p @ np.ones(d.n_p)).max() <= 1e-13


def test_inf_sup_smoke():
    d = assemble_stokes(3)
    S = (d.B @ sp.diags(1.0 / d.M_v.diagonal()) @ d.B.T).toarray()
    G = solve_dense(d.M_p.toarray(), S)
    ev = np.sort(eig_dense(G).real)
    assert abs(ev[0]) <= 1e-10
    assert ev[1] > 1e-3


def test_forcing_matches_symbolic_derivative():
    x, y, t = sympy.symbols("x y t")
    tf = 2.0
    v = sympy.exp(tf - t) * sympy.cos(sympy.pi * x / 2) * sympy.cos(sympy.pi * y / 2) + 1
    f = sympy.lambdify((x, y, t), sympy.diff(v, t) - sympy.diff(v, x, 2) - sympy.diff(v, y, 2))
    g_t = sympy.lambdify((x, y, t), sympy.diff(v, t))
    p = heat_problem(tf)
    pts = np.random.default_rng(3).uniform([-1, -1, 0], [1, 1, tf], size=(20, 3))
    for a, b, c in pts:
        assert p.forcing(a, b, c) == pytest.approx(f(a, b, c), rel=1e-13, abs=1e-13)
        assert p.boundary_dt(a, b, c) == pytest.approx(g_t(a, b, c), rel=1e-13, abs=1e-13)


def test_heat_stage_boundary_lift_vanishes():
    d = assemble_heat(3, 1)
    _, g, g_dt = rhs_heat(d, heat_problem(), 0.7)
    np.testing.assert_allclose(g, 1.0, atol=1e-14)
    assert np.abs(g_dt).max() <= 1e-14


def test_zero_problem_gives_zero_vectors():
    from rkaao.problems import ManufacturedProblem

    zero = lambda x, y, t: np.zeros_like(x)  # noqa: E731
    d = assemble_heat(2, 2)
    f, g, g_dt = rhs_heat(d, ManufacturedProblem("zero", 1.0, zero, zero, zero), 0.3)
    assert not f.any() and not g.any() and not g_dt.any()


def test_error_norms_zero_on_interpolant():
    hp = heat_problem()
    d = assemble_heat(3, 1)
    X, Y = d.coords()
    times = np.array([0.0, 1.0, 2.0])
    v_err, p_err, _ = error_norms(Trajectory(times, [hp.exact(X, Y, t) for t in times], None), hp, d)
    assert v_err == 0.0 and p_err is None

    sp_ = stokes_problem()
    ds = assemble_stokes(2)
    Xv, Yv = ds.vgrid.coords()
    I = ds.vgrid.interior
    Xp, Yp = ds.pgrid.coords()
    vs = [np.concatenate(sp_.velocity(Xv[I], Yv[I], t)) for t in times]
    ps = [sp_.pressure(Xp, Yp, t) + 5.0 for t in times]  # arbitrary constant
    v_err, p_err, _ = error_norms(Trajectory(times, vs, ps), sp_, ds)
    assert v_err == 0.0 and p_err <= 1e-12


def test_scaled_error_fallback_flag():
    e, flag = scaled_linf_error(np.array([1.0, 0.5]), np.array([1.0, 0.0]))
    assert flag and e == 0.5
    e, flag = scaled_linf_error(np.array([1.1, 2.0]), np.array([1.0, 2.0]))
    assert not flag and e == pytest.approx(0.1)


def test_pressure_mean_shift_weighted():
    d = assemble_stokes(2)
    q = pressure_mean_shift(np.arange(d.n_p, dtype=float), d.M_p)
    assert abs(np.ones(d.n_p) @ (d.M_p @ q)) <= 1e-12


def test_hierarchy_nested():
    d = assemble_heat(4, 2)
    assert [lv.level for lv in d.hierarchy] == [1, 2, 3, 4]
    # interpolation of a quadratic is exact between nested Q2 grids
    fine, coarse = d.hierarchy[-1], d.hierarchy[-2]
    from rkaao.fem2d import Grid

    gc, gf = Grid(2, 8), Grid(2, 16)
    Xc, Yc = gc.coords()
    Xf, Yf = gf.coords()
    q = lambda x, y: (1 - x ** 2) * (1 - y ** 2)  # noqa: E731
    np.testing.assert_allclose(fine.P @ q(Xc, Yc)[gc.interior], q(Xf, Yf)[gf.interior], atol=1e-14)
    assert coarse.P is not None and d.hierarchy[0].P is None


def test_bad_arguments():
    with pytest.raises(DomainError):
        assemble_heat(0, 1)
    with pytest.raises(DomainError):
        assemble_heat(2, 3)
    with pytest.raises(DomainError):
        assemble_stokes(1)


def test_mass_full_q2_sum():
    from rkaao.fem2d import Grid

    assert mass_full(Grid(2, 4)).sum() == pytest.approx(4.0, rel=1e-13)
