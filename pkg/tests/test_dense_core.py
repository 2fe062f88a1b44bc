import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkaao.dense_core import det_dense, eig_dense, lu_factor, solve_dense, svd_real
from rkaao.exceptions import CapacityError, DimensionError, DomainError, SingularityError
from rkaao.tableaux import Family, make_tableau


def _check_svd(A, U, s, V):
    n = A.shape[0]
    assert np.max(np.abs(U.T @ U - np.eye(n))) <= 1e-12
    assert np.max(np.abs(V.T @ V - np.eye(n))) <= 1e-12
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    scale = max(1.0, np.max(np.abs(A)))
    assert np.max(np.abs(U @ np.diag(s) @ V.T - A)) <= 1e-12 * scale


def test_svd_identity():
    U, s, V = svd_real(np.eye(2))
    np.testing.assert_allclose(s, [1, 1])
    _check_svd(np.eye(2), U, s, V)


def test_svd_signed_diagonal():
    A = np.diag([3.0, -2.0])
    U, s, V = svd_real(A)
    np.testing.assert_allclose(s, [3, 2], atol=1e-14)
    _check_svd(A, U, s, V)


def test_svd_gauss2_closed_form():
    A = make_tableau(Family.GAUSS, 2).A
    G = A.T @ A
    tr, det = np.trace(G), np.linalg.det(G)
    disc = np.sqrt(tr * tr / 4 - det)
    expected = np.sqrt([tr / 2 + disc, tr / 2 - disc])
    _, s, _ = svd_real(A)
    np.testing.assert_allclose(s, expected, rtol=1e-13)


def test_svd_rank_deficient():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    U, s, V = svd_real(A)
    _check_svd(A, U, s, V)
    assert s[1] < 1e-14


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(1)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_svd_random_properties(A):
    U, s, V = svd_real(A)
    _check_svd(A, U, s, V)
    np.testing.assert_allclose(s, np.linalg.svd(A, compute_uv=False), atol=1e-10 * max(1, np.abs(A).max()))


@pytest.mark.parametrize("mag", [1e-120, 1e150])
def test_svd_extreme_magnitudes(mag):
    A = mag * np.array([[0.0, 1.0], [1.0, 1.0]])
    U, s, V = svd_real(A)
    np.testing.assert_allclose(s, mag * np.array([(1 + np.sqrt(5)) / 2, (np.sqrt(5) - 1) / 2]), rtol=1e-13)
    assert np.max(np.abs(U @ np.diag(s) @ V.T - A)) <= 1e-14 * mag


def test_svd_rejects_bad_input():
    with pytest.raises(DimensionError):
        svd_real(np.ones((2, 3)))
    with pytest.raises(DomainError):
        svd_real(np.array([[np.nan, 0], [0, 1]]))


def test_eig_rotation_and_triangular():
    ev = eig_dense(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    np.testing.assert_allclose(ev, [-1j, 1j], atol=1e-14)
    T = np.triu(np.arange(1.0, 17.0).reshape(4, 4))
    np.testing.assert_allclose(eig_dense(T).real, sorted(np.diag(T)), atol=1e-12)


def test_eig_gauss_w_on_unit_circle():
    from rkaao.tableaux import rk_factorization

    f = rk_factorization(make_tableau(Family.GAUSS, 2))
    np.testing.assert_allclose(np.abs(eig_dense(f.U.T @ f.V)), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_eig_conjugate_closure_and_determinant(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    ev = eig_dense(A)
    conj = np.sort_complex(np.conj(ev))
    np.testing.assert_allclose(np.sort_complex(ev), conj, atol=1e-10 * max(1, np.abs(ev).max()))
    d = det_dense(A)
    assert abs(np.prod(ev) - d) <= 1e-8 * max(abs(d), 1e-300) + 1e-12


def test_eig_cap():
    with pytest.raises(CapacityError):
        eig_dense(np.eye(4), cap=3)


def test_solve_examples():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(solve_dense(np.eye(3), b), b)
    np.testing.assert_allclose(solve_dense(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1, 2])


def test_solve_vandermonde_collocation_weights():
    c = np.array([0.0, 0.5, 1.0])
    V = np.vander(c, increasing=True).T  # row k: c_i^k
    rhs = 1.0 / np.arange(1, 4)
    w = solve_dense(V, rhs)
    assert np.max(np.abs(V @ w - rhs)) <= 1e-12
    np.testing.assert_allclose(w, [1 / 6, 2 / 3, 1 / 6], atol=1e-14)  # Simpson


def test_solve_singular_pivot_named():
    with pytest.raises(SingularityError, match="pivot"):
        lu_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_solve_residual_bound_random_batch():
    rng = np.random.default_rng(7)
    done = 0
    while done < 1000:
        n = int(rng.integers(1, 12))
        A = rng.standard_normal((n, n)) + n * np.eye(n) * rng.choice([0.0, 1.0])
        if np.linalg.cond(A) > 1e6:
            continue
        b = rng.standard_normal(n)
        x = solve_dense(A, b)
        assert np.max(np.abs(A @ x - b)) <= 1e-10 * (np.abs(A).max() * np.abs(x).max() + np.abs(b).max())
        done += 1
