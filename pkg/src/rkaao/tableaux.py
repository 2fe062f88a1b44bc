"""Butcher tableaux for collocation-type implicit Runge--Kutta families.

Gauss, Radau IIA and Lobatto IIIC methods are generated for any stage
count up to :data:`MAX_STAGES`.  Nodes are roots of explicit integer
polynomials (companion-matrix eigenvalues polished by Newton steps in
extended precision); weights and coefficients come from small Vandermonde
systems expressing the simplifying order conditions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb

import mpmath
import numpy as np

from .dense_core import eig_dense, solve_dense, svd_real
from .exceptions import ConvergenceError, DomainError, SingularityError

__all__ = [
    "Family",
    "ButcherTableau",
    "RkSvdFactors",
    "make_tableau",
    "rk_factorization",
    "polar_invariance_check",
    "order_condition_residuals",
    "format_tableau",
]

MAX_STAGES = 12


class Family(str, enum.Enum):
    GAUSS = "gauss"
    RADAU_IIA = "radau"
    LOBATTO_IIIC = "lobatto"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        aliases = {
            "gauss": cls.GAUSS, "gausslegendre": cls.GAUSS,
            "radau": cls.RADAU_IIA, "radauiia": cls.RADAU_IIA, "radau2a": cls.RADAU_IIA,
            "lobatto": cls.LOBATTO_IIIC, "lobattoiiic": cls.LOBATTO_IIIC, "lobatto3c": cls.LOBATTO_IIIC,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown Runge-Kutta family {name!r}") from None

    @property
    def label(self):
        return {"gauss": "Gauss", "radau": "Radau IIA", "lobatto": "Lobatto IIIC"}[self.value]


@dataclass(frozen=True)
class ButcherTableau:
    family: Family
    s: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    @property
    def stiffly_accurate(self):
        return bool(np.allclose(self.A[-1], self.b, rtol=0, atol=1e-12))

    @property
    def name(self):
        return f"{self.s}-stage {self.family.label}"


@dataclass(frozen=True)
class RkSvdFactors:
    """SVD ``A = U diag(sigma) V^T`` of a Butcher matrix with diagnostics of ``W = U^T V``."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    W: np.ndarray
    w_spectrum: np.ndarray = field(repr=False)
    min_real_w: float = 0.0

    @property
    def s(self):
        return self.sigma.size

    def A_inverse(self):
        return self.V @ np.diag(1.0 / self.sigma) @ self.U.T


def _poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _node_polynomial(family, s):
    """Integer coefficients (highest degree first) of the node polynomial on [0, 1]."""
    if family is Family.GAUSS:
        # shifted Legendre: d^s/dx^s [x^s (x-1)^s]
        m, k, d = s, s, s
    elif family is Family.RADAU_IIA:
        m, k, d = s - 1, s, s - 1
    else:
        m, k, d = s - 1, s - 1, s - 2
    xm = [1] + [0] * m
    xk = [comb(k, j) * (-1) ** j for j in range(k + 1)]
    p = _poly_mul(xm, xk)
    for _ in range(d):
        deg = len(p) - 1
        p = [p[i] * (deg - i) for i in range(deg)]
    return p


def _polish_roots(coeffs, roots, steps=3):
    with mpmath.workdps(40):
        mp_coeffs = [mpmath.mpf(int(c)) for c in coeffs]
        dcoeffs = [mpmath.mpf(int(c) * (len(coeffs) - 1 - i)) for i, c in enumerate(coeffs[:-1])]
        out = []
        for r in roots:
            x = mpmath.mpf(float(r))
            for _ in range(steps):
                fx = mpmath.polyval(mp_coeffs, x)
                dfx = mpmath.polyval(dcoeffs, x)
                if dfx == 0:
                    break
                x -= fx / dfx
            out.append(x)
    return out


def _nodes(family, s):
    coeffs = _node_polynomial(family, s)
    deg = len(coeffs) - 1
    roots = []
    if deg >= 1:
        lead = float(coeffs[0])
        comp = np.zeros((deg, deg))
        comp[0, :] = -np.array([float(c) for c in coeffs[1:]]) / lead
        comp[1:, :-1] += np.eye(deg - 1)
        lam = eig_dense(comp)
        if np.max(np.abs(lam.imag)) > 1e-6:
            raise ConvergenceError(f"complex node estimates for {family.label} s={s}")
        roots = _polish_roots(coeffs, np.sort(lam.real))
    c = np.array(sorted(float(r) for r in roots))
    # Radau IIA and Lobatto node polynomials vanish exactly at the endpoints
    if family is not Family.GAUSS:
        c[-1] = 1.0
    if family is Family.LOBATTO_IIIC:
        c[0] = 0.0
    if np.any(c < -1e-14) or np.any(c > 1 + 1e-14) or np.any(np.diff(c) <= 1e-12):
        raise ConvergenceError(f"node computation failed for {family.label} s={s}: {c}")
    return np.clip(c, 0.0, 1.0)


def _quadrature_weights(c):
    s = c.size
    V = np.vander(c, s, increasing=True).T  # V[k, j] = c_j^k
    return solve_dense(V, 1.0 / np.arange(1, s + 1))


def _collocation_matrix(c):
    """Rows solve C(s): sum_j a_ij c_j^(k-1) = c_i^k / k, k = 1..s."""
    s = c.size
    V = np.vander(c, s, increasing=True).T
    k = np.arange(1, s + 1)
    rhs = (c[None, :] ** k[:, None]) / k[:, None]  # rhs[k-1, i]
    return solve_dense(V, rhs).T


def _lobatto_iiic_matrix(c, b):
    """Rows solve a_i1 = b_1 together with C(s-1)."""
    s = c.size
    V = np.zeros((s, s))
    V[: s - 1] = np.vander(c, s - 1, increasing=True).T
    V[s - 1, 0] = 1.0
    A = np.empty((s, s))
    for i in range(s):
        k = np.arange(1, s)
        rhs = np.append(c[i] ** k / k, b[0])
        A[i] = solve_dense(V, rhs)
    return A


def make_tableau(family, s):
    """Butcher tableau of the ``s``-stage member of ``family``.

    Examples
    --------
    >>> t = make_tableau("gauss", 1)
    >>> t.A, t.b, t.c
    (array([[0.5]]), array([1.]), array([0.5]))
    """
    family = Family.parse(family)
    s = int(s)
    if s < 1 or s > MAX_STAGES:
        raise DomainError(f"stage count must be in [1, {MAX_STAGES}], got {s}")
    if family is Family.LOBATTO_IIIC and s < 2:
        raise DomainError("Lobatto IIIC requires at least 2 stages")
    c = _nodes(family, s)
    b = _quadrature_weights(c)
    if family is Family.LOBATTO_IIIC:
        A = _lobatto_iiic_matrix(c, b)
        order = 2 * s - 2
    else:
        A = _collocation_matrix(c)
        order = 2 * s if family is Family.GAUSS else 2 * s - 1
    for arr in (A, b, c):
        arr.setflags(write=False)
    return ButcherTableau(family=family, s=s, A=A, b=b, c=c, order=order)


def order_condition_residuals(t):
    """Max residuals of B(order), C(stage order) and the row-sum condition.

    The stage order is ``s`` for Gauss and Radau IIA, ``s - 1`` for Lobatto IIIC.
    """
    s = t.s
    kb = np.arange(1, t.order + 1)
    B = np.max(np.abs((t.c[None, :] ** (kb[:, None] - 1)) @ t.b - 1.0 / kb))
    q = s - 1 if t.family is Family.LOBATTO_IIIC else s
    kc = np.arange(1, q + 1)
    lhs = t.A @ (t.c[:, None] ** (kc[None, :] - 1))
    C = np.max(np.abs(lhs - t.c[:, None] ** kc[None, :] / kc[None, :])) if q else 0.0
    rows = np.max(np.abs(t.A.sum(axis=1) - t.c))
    return {"B": float(B), "C": float(C), "row_sum": float(rows), "b_sum": float(abs(t.b.sum() - 1.0))}


def _w_diagnostics(U, V):
    W = U.T @ V
    spec = eig_dense(W)
    return W, spec, float(spec.real.min())


def rk_factorization(t):
    """SVD factors of ``t.A`` with the spectrum of ``W = U^T V``.

    Raises
    ------
    SingularityError
        If the smallest singular value is below 1e-12.
    """
    A = t.A if isinstance(t, ButcherTableau) else np.atleast_2d(np.asarray(t, dtype=float))
    U, sigma, V = svd_real(A)
    if sigma[-1] <= 1e-12:
        raise SingularityError(f"Runge-Kutta matrix is singular (sigma_min={sigma[-1]:.3e})")
    W, spec, minre = _w_diagnostics(U, V)
    return RkSvdFactors(U=U, sigma=sigma, V=V, W=W, w_spectrum=spec, min_real_w=minre)


def polar_invariance_check(t, trials):
    """Spread of the sorted spectrum of ``U^T V`` over sign-flipped SVDs.

    Each trial flips the signs of a matched set of columns of ``U`` and ``V``
    (all ``2**s`` patterns are enumerated when ``trials`` reaches that count).

    Returns
    -------
    discrepancy : float or None
        Max deviation from the reference spectrum, or ``None`` when the
        singular values are not distinct (check skipped).
    status : str
    """
    f = rk_factorization(t)
    if f.s > 1 and np.min(-np.diff(f.sigma)) <= 1e-10:
        return None, "invariance check skipped: repeated singular values"
    ref = f.w_spectrum
    worst = 0.0
    n_patterns = 2 ** f.s
    for trial in range(min(int(trials), n_patterns)):
        signs = np.array([1.0 if (trial >> j) & 1 == 0 else -1.0 for j in range(f.s)])
        U2, V2 = f.U * signs, f.V * signs
        assert np.allclose(U2 @ np.diag(f.sigma) @ V2.T, f.U @ np.diag(f.sigma) @ f.V.T, atol=1e-12)
        spec = eig_dense(U2.T @ V2)
        worst = max(worst, float(np.max(np.abs(spec - ref))) if spec.size else 0.0)
    return worst, "ok"


def format_tableau(t):
    """Text rendering of a tableau with 16 significant digits."""
    fmt = lambda v: f"{v: .16g}"  # noqa: E731
    width = 24
    lines = [f"# {t.name}, order {t.order}"]
    for i in range(t.s):
        row = "".join(fmt(a).rjust(width) for a in t.A[i])
        lines.append(f"{fmt(t.c[i]).rjust(width)} |{row}")
    lines.append("-" * (width + 2 + width * t.s))
    lines.append(" " * width + " |" + "".join(fmt(v).rjust(width) for v in t.b))
    return "\n".join(lines)
