"""Manufactured test problems on (-1, 1)^2."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["ManufacturedProblem", "heat_problem", "stokes_problem", "lid_cavity_problem", "stationary_heat_problem"]


@dataclass(frozen=True)
class ManufacturedProblem:
    """Callables of ``(x, y, t)``; vector-valued ones return a 2-tuple.

    ``exact`` is ``None`` when no closed-form solution is known.
    """

    name: str
    t_f: float
    forcing: Callable
    boundary: Callable
    boundary_dt: Callable
    exact: Optional[Callable] = None
    pressure: Optional[Callable] = None

    @property
    def velocity(self):
        return self.exact

    @property
    def is_vector(self):
        return self.pressure is not None or self.name.startswith(("stokes", "lid"))


def heat_problem(t_f=2.0):
    """``v = exp(t_f - t) cos(pi x / 2) cos(pi y / 2) + 1``."""
    def cc(x, y):
        return np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)

    def exact(x, y, t):
        return np.exp(t_f - t) * cc(x, y) + 1.0

    def forcing(x, y, t):
        return np.exp(t_f - t) * (0.5 * np.pi ** 2 - 1.0) * cc(x, y)

    def boundary(x, y, t):
        return exact(x, y, t)

    def boundary_dt(x, y, t):
        return -np.exp(t_f - t) * cc(x, y)

    return ManufacturedProblem("heat", t_f, forcing, boundary, boundary_dt, exact)


def stationary_heat_problem(t_f=1.0, value=1.0):
    """Constant solution with zero forcing (every stage vanishes)."""
    zero = lambda x, y, t: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    const = lambda x, y, t: np.full_like(np.asarray(x, dtype=float), value)  # noqa: E731
    return ManufacturedProblem("heat-const", t_f, zero, const, zero, const)


def stokes_problem(t_f=2.0):
    """Time-dependent colliding flow.

    ``v = exp(t_f - t) (20 x y^3, 5 x^4 - 5 y^4)`` and
    ``p = exp(t_f - t) (60 x^2 y - 20 y^3)`` (up to a constant), so that
    ``-lap v + grad p = 0`` and the forcing reduces to ``v_t``.
    """
    def velocity(x, y, t):
        e = np.exp(t_f - t)
        return e * 20.0 * x * y ** 3, e * (5.0 * x ** 4 - 5.0 * y ** 4)

    def velocity_dt(x, y, t):
        u, w = velocity(x, y, t)
        return -u, -w

    def pressure(x, y, t):
        return np.exp(t_f - t) * (60.0 * x ** 2 * y - 20.0 * y ** 3)

    return ManufacturedProblem("stokes", t_f, velocity_dt, velocity, velocity_dt, velocity, pressure)


def lid_cavity_problem(t_f=4.0):
    """Driven cavity: lid velocity ``(min(t, 1), 0)`` on ``y = 1``, no-slip elsewhere."""
    def _zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def forcing(x, y, t):
        return _zero(x), _zero(x)

    def boundary(x, y, t):
        lid = np.isclose(np.asarray(y, dtype=float), 1.0) & (np.abs(x) < 1.0 - 1e-12)
        return np.where(lid, min(t, 1.0), 0.0), _zero(x)

    def boundary_dt(x, y, t):
        lid = np.isclose(np.asarray(y, dtype=float), 1.0) & (np.abs(x) < 1.0 - 1e-12)
        return np.where(lid, 1.0 if t < 1.0 else 0.0, 0.0), _zero(x)

    return ManufacturedProblem("lid-cavity", t_f, forcing, boundary, boundary_dt)
