"""Quadrature rules on the unit interval, unit triangle and unit square."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np

MAX_ORDER = 6


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    order: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def gauss_interval(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_points_for(order: int) -> int:
    return max(1, ceil((order + 1) / 2))


@lru_cache(maxsize=None)
def quad_rule(shape: str, order: int) -> QuadratureRule:
    """Rule on the reference ``shape`` ('tri' or 'quad') exact to polynomial ``order``."""
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"unsupported quadrature order {order} (1..{MAX_ORDER})")
    if shape == "quad":
        x, w = gauss_interval(gauss_points_for(order))
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.outer(w, w)
        return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), order)
    if shape != "tri":
        raise ValueError(f"unknown element shape {shape!r}")
    if order == 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), order)
    if order == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return QuadratureRule(pts, np.full(3, 1 / 6), order)
    # Collapsed (Duffy) tensor Gauss rule; the (1 - u) Jacobian adds one degree in u.
    u, wu = gauss_interval(ceil((order + 2) / 2))
    v, wv = gauss_interval(gauss_points_for(order))
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    W = (np.outer(wu, wv) * (1.0 - U)).ravel()
    return QuadratureRule(pts, W, order)
