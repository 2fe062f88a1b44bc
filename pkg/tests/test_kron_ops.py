import numpy as np
import pytest
import scipy.sparse as sp

from rkaao.dense_core import solve_dense
from rkaao.exceptions import DimensionError
from rkaao.fem2d import assemble_heat
from rkaao.kron_ops import IDENTITY, KronOperator, block_combine, coupling_transform
from rkaao.tableaux import Family, make_tableau, rk_factorization


def _random_sparse(rng, n):
    A = sp.random(n, n, density=0.2, random_state=rng, format="csr")
    return A + sp.eye(n)


def test_scalar_stage():
    d = assemble_heat(3, 1)
    tau, a = 0.1, 0.37
    op = KronOperator([(np.eye(1), d.M, 1.0), (np.array([[a]]), d.K, tau)])
    x = np.random.default_rng(0).standard_normal(d.n_x)
    np.testing.assert_allclose(op(x), (d.M + tau * a * d.K) @ x, atol=1e-13)


def test_zero_tau_is_block_diagonal_mass():
    d = assemble_heat(2, 1)
    A = make_tableau(Family.GAUSS, 2).A
    op = KronOperator([(np.eye(2), d.M, 1.0), (A, d.K, 0.0)])
    x = np.random.default_rng(1).standard_normal(2 * d.n_x)
    np.testing.assert_allclose(op(x), np.concatenate([d.M @ x[: d.n_x], d.M @ x[d.n_x:]]), atol=1e-14)


def test_matches_dense_materialization():
    d = assemble_heat(3, 1)
    A = make_tableau(Family.RADAU_IIA, 3).A
    op = KronOperator([(np.eye(3), d.M, 1.0), (A, d.K, 0.05)])
    Ad = np.kron(np.eye(3), d.M.toarray()) + 0.05 * np.kron(A, d.K.toarray())
    x = np.random.default_rng(2).standard_normal(3 * d.n_x)
    assert np.abs(op(x) - Ad @ x).max() <= 1e-12


def test_random_against_dense_200_trials():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        s, n = int(rng.integers(1, 5)), int(rng.integers(1, 101))
        terms = []
        for _ in range(int(rng.integers(1, 4))):
            X = IDENTITY if rng.random() < 0.2 else _random_sparse(rng, n)
            terms.append((rng.standard_normal((s, s)), X, rng.standard_normal()))
        op = KronOperator(terms, n=n)
        x = rng.standard_normal(s * n)
        worst = max(worst, np.abs(op(x) - op.to_dense() @ x).max())
    assert worst <= 1e-12


def test_linearity():
    rng = np.random.default_rng(5)
    d = assemble_heat(3, 2)
    op = KronOperator([(rng.standard_normal((4, 4)), d.K, 1.0), (np.eye(4), d.M, 2.0)])
    x, y = rng.standard_normal((2, 4 * d.n_x))
    al, be = 1.3, -0.7
    lhs = op(al * x + be * y)
    rhs = al * op(x) + be * op(y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


def test_compensated_path_agrees():
    rng = np.random.default_rng(8)
    C = rng.standard_normal((9, 9))
    Z = rng.standard_normal((9, 30))
    np.testing.assert_allclose(block_combine(C, Z), C @ Z, atol=1e-13)


def test_dimension_errors_name_the_term():
    M = sp.eye(4)
    with pytest.raises(DimensionError, match="term 1"):
        KronOperator([(np.eye(2), M), (np.eye(3), M)])
    with pytest.raises(DimensionError, match="term 1"):
        KronOperator([(np.eye(2), M), (np.eye(2), sp.eye(5))])
    op = KronOperator([(np.eye(2), M)])
    with pytest.raises(DimensionError):
        op(np.ones(7))
    with pytest.raises(DimensionError):
        KronOperator([(np.eye(2), IDENTITY)])


def test_coupling_identity_and_isometry():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(3 * 49)
    np.testing.assert_array_equal(coupling_transform(np.eye(3), x), x)
    f = rk_factorization(make_tableau(Family.RADAU_IIA, 3))
    for Q in (f.U, f.V):
        y = coupling_transform(Q, x)
        assert abs(np.linalg.norm(y) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x)


def test_coupling_roundtrip():
    rng = np.random.default_rng(6)
    C = make_tableau(Family.LOBATTO_IIIC, 4).A
    x = rng.standard_normal(4 * 25)
    y = coupling_transform(C, x)
    back = solve_dense(C, y.reshape(4, -1)).ravel()
    assert np.abs(back - x).max() <= 1e-11


def test_coupling_errors():
    with pytest.raises(DimensionError):
        coupling_transform(np.ones((2, 3)), np.ones(6))
    with pytest.raises(DimensionError):
        coupling_transform(np.eye(2), np.ones(5))
