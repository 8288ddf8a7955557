"""Closed-form problem data for the Poisson and Stokes experiments.

Every problem exposes the same small interface used by the assemblers:

* ``forcing(x1, x2)`` - body force (a pair for Stokes),
* ``dirichlet(x1, x2, attr)`` - Dirichlet value on a side or the obstacle,
* ``neumann(x1, x2, attr)`` - prescribed flux/traction,
* ``boundary_conditions(nx, ny)`` - side -> ``"dirichlet"`` | ``"neumann"``.

Poisson problems solve ``-lap u = f``; Stokes problems solve
``-nu lap u + grad p = f``, ``div u = 0``.  Coordinates are global.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import OBSTACLE, SIDES

TWO_PI = 2.0 * np.pi
DEFAULT_NU = 1.1

# Named random streams; sample ``i`` of stream ``tag`` uses default_rng([seed, tag, i]).
STREAMS = {"poisson-train": 1, "poisson-test": 2, "spiral": 3, "stokes-train": 4, "stokes-test": 5, "layout": 6}


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), STREAMS[tag], *map(int, index)])


def _zeros(x1):
    return np.zeros(np.shape(x1))


def _all_dirichlet(nx=1, ny=1):
    return {s: "dirichlet" for s in SIDES}


# --- Poisson -------------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidProblem:
    """``f = sin 2 pi (k . x + theta)`` with Dirichlet data ``sin 2 pi (k_b . x + theta_b)``."""

    k: tuple
    theta: float
    kb: tuple
    thetab: float
    has_neumann_data = False

    def forcing(self, x1, x2):
        return np.sin(TWO_PI * (self.k[0] * x1 + self.k[1] * x2 + self.theta))

    def dirichlet(self, x1, x2, attr=None):
        return np.sin(TWO_PI * (self.kb[0] * x1 + self.kb[1] * x2 + self.thetab))

    def neumann(self, x1, x2, attr=None):
        return _zeros(x1)

    boundary_conditions = staticmethod(_all_dirichlet)


@dataclass(frozen=True)
class SpiralProblem:
    """Gaussian-windowed cosine wave along an Archimedean spiral on ``[0, L]^2``, zero boundary data.

    The polar angle is measured with ``arctan2`` and mapped to ``[0, 2 pi)``.
    """

    s: float
    k: float
    L: float
    w: float = 2.0
    has_neumann_data = False

    def __post_init__(self):
        if not (self.w > 0 and self.L > 0):
            raise ValueError("spiral width and domain size must be positive")

    def forcing(self, x1, x2):
        c = 0.5 * self.L
        r = np.hypot(x1 - c, x2 - c)
        th = np.mod(np.arctan2(x2 - c, x1 - c), TWO_PI)
        d = np.abs(r - self.s * th * self.L / (4.0 * np.pi))
        return np.exp(-(d**2) / (2.0 * self.w**2)) * np.cos(TWO_PI * self.k * d)

    def dirichlet(self, x1, x2, attr=None):
        return _zeros(x1)

    def neumann(self, x1, x2, attr=None):
        return _zeros(x1)

    boundary_conditions = staticmethod(_all_dirichlet)


@dataclass(frozen=True)
class LinearProblem:
    """Harmonic linear field ``u = a + b . x``; every Poisson discretisation reproduces it."""

    a: float
    b: tuple
    has_neumann_data = False

    def exact(self, x1, x2):
        return self.a + self.b[0] * x1 + self.b[1] * x2

    def forcing(self, x1, x2):
        return _zeros(x1)

    def dirichlet(self, x1, x2, attr=None):
        return self.exact(x1, x2)

    def neumann(self, x1, x2, attr=None):
        return _zeros(x1)

    boundary_conditions = staticmethod(_all_dirichlet)


POISSON_TRAIN_RANGE = 0.5
POISSON_TEST_RANGE = 0.7


def sample_poisson_params(rng: np.random.Generator, test: bool = False) -> SinusoidProblem:
    """Wave vectors uniform in ``[-a, a]^2`` (a = 0.5 training, 0.7 test), phases in ``[0, 1]``."""
    a = POISSON_TEST_RANGE if test else POISSON_TRAIN_RANGE
    k = rng.uniform(-a, a, 2)
    kb = rng.uniform(-a, a, 2)
    theta, thetab = rng.uniform(0.0, 1.0, 2)
    return SinusoidProblem(tuple(k), float(theta), tuple(kb), float(thetab))


def sample_spiral_params(rng: np.random.Generator, L: float, w: float = 2.0, upper: float = 0.7) -> SpiralProblem:
    s, k = rng.uniform(0.0, upper, 2)
    return SpiralProblem(float(s), float(k), float(L), w)


def poisson_fields(problem, x1, x2):
    """Forcing and Dirichlet data at points."""
    return problem.forcing(x1, x2), problem.dirichlet(x1, x2)


# --- Stokes --------------------------------------------------------------------


def assign_upwind_sides(g1: float, g2: float) -> dict:
    """Dirichlet on the inflow sides, homogeneous Neumann elsewhere.  Ties go to the low side."""
    bc = {s: "neumann" for s in SIDES}
    bc["left" if g1 >= 0 else "right"] = "dirichlet"
    bc["bottom" if g2 >= 0 else "top"] = "dirichlet"
    return bc


@dataclass(frozen=True)
class FlowPastArray:
    """Uniform inflow ``(g1, g2)`` with a small sinusoidal perturbation on the upwind sides."""

    g: tuple
    dg: tuple = (0.0, 0.0)
    k1: tuple = (0.0, 0.0)
    k2: tuple = (0.0, 0.0)
    theta: tuple = (0.0, 0.0)
    nu: float = DEFAULT_NU
    has_forcing = False
    has_neumann_data = False

    def forcing(self, x1, x2):
        return _zeros(x1), _zeros(x1)

    def inflow(self, x1, x2):
        u1 = self.g[0] + self.dg[0] * np.sin(TWO_PI * (self.k1[0] * x1 + self.k1[1] * x2 + self.theta[0]))
        u2 = self.g[1] + self.dg[1] * np.sin(TWO_PI * (self.k2[0] * x1 + self.k2[1] * x2 + self.theta[1]))
        return u1, u2

    def dirichlet(self, x1, x2, attr):
        if attr == OBSTACLE:
            return _zeros(x1), _zeros(x1)
        return self.inflow(x1, x2)

    def neumann(self, x1, x2, attr):
        return _zeros(x1), _zeros(x1)

    def boundary_conditions(self, nx=1, ny=1):
        return assign_upwind_sides(*self.g)


@dataclass(frozen=True)
class ChannelFlow:
    """Parabolic inflow at ``x1 = 0``, no-slip walls at ``x2 = 0, N_c``, free outflow at ``x1 = N_c``."""

    n_c: int
    u_in: float = 1.0
    nu: float = DEFAULT_NU
    has_forcing = False
    has_neumann_data = False

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("channel size must be at least 1")

    def forcing(self, x1, x2):
        return _zeros(x1), _zeros(x1)

    def dirichlet(self, x1, x2, attr):
        if attr == "left":
            return self.u_in * (1.0 - 4.0 * (x2 / self.n_c - 0.5) ** 2) + _zeros(x1), _zeros(x1)
        return _zeros(x1), _zeros(x1)

    def neumann(self, x1, x2, attr):
        return _zeros(x1), _zeros(x1)

    def boundary_conditions(self, nx=1, ny=1):
        return {"left": "dirichlet", "bottom": "dirichlet", "top": "dirichlet", "right": "neumann"}


@dataclass(frozen=True)
class StokesMMS:
    """Manufactured solution ``u = (cos x1 sin x2, -sin x1 cos x2)``, ``p = 2 nu sin x1 sin x2``."""

    nu: float = DEFAULT_NU
    has_forcing = True
    has_neumann_data = False

    def velocity(self, x1, x2):
        return np.cos(x1) * np.sin(x2), -np.sin(x1) * np.cos(x2)

    def pressure(self, x1, x2):
        return 2.0 * self.nu * np.sin(x1) * np.sin(x2)

    def pressure_mean(self, L: float = 1.0) -> float:
        """Mean of the exact pressure over ``[0, L]^2``."""
        return 2.0 * self.nu * ((1.0 - np.cos(L)) / L) ** 2

    def forcing(self, x1, x2):
        return 4.0 * self.nu * np.cos(x1) * np.sin(x2), _zeros(x1)

    def dirichlet(self, x1, x2, attr=None):
        return self.velocity(x1, x2)

    def neumann(self, x1, x2, attr=None):
        return _zeros(x1), _zeros(x1)

    boundary_conditions = staticmethod(_all_dirichlet)


def stokes_mms(nu: float = DEFAULT_NU) -> StokesMMS:
    return StokesMMS(nu)


def stokes_fields(problem, x1, x2, side):
    """Boundary datum on ``side`` (a pair of arrays); obstacles are always no-slip."""
    if side == OBSTACLE:
        return _zeros(x1), _zeros(x1)
    return problem.dirichlet(x1, x2, side)


STOKES_TRAIN_RANGE = 1.0
STOKES_TEST_RANGE = 1.5


def sample_stokes_params(rng: np.random.Generator, test: bool = False, nu: float = DEFAULT_NU) -> FlowPastArray:
    """Inflow ``g`` uniform in ``[-a, a]^2`` (a = 1 training, 1.5 test); perturbation ranges are shared."""
    a = STOKES_TEST_RANGE if test else STOKES_TRAIN_RANGE
    g = rng.uniform(-a, a, 2)
    dg = rng.uniform(-0.1, 0.1, 2)
    k1 = rng.uniform(-0.5, 0.5, 2)
    k2 = rng.uniform(-0.5, 0.5, 2)
    theta = rng.uniform(0.0, 1.0, 2)
    return FlowPastArray(tuple(g), tuple(dg), tuple(k1), tuple(k2), tuple(theta), nu)
