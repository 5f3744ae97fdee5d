"""Quadrature on the reference triangle and on edges."""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi

MAX_TRIANGLE_EXACTNESS = 40


class QuadratureRule(NamedTuple):
    points: np.ndarray   # (n, 2) reference coordinates, or (n,) on [0, 1]
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_quadrature(exactness: int) -> QuadratureRule:
    """Rule on the triangle (0,0), (1,0), (0,1) exact for total degree ``exactness``.

    Degree 1 is the centroid rule; higher degrees use the collapsed
    Gauss-Jacobi x Gauss-Legendre product.
    """
    if exactness < 0 or exactness > MAX_TRIANGLE_EXACTNESS:
        raise ValueError(f"unsupported triangle quadrature exactness {exactness}")
    if exactness <= 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1)
    n = (exactness + 2) // 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    u, wu = (1 + xj) / 2, wj / 4
    xl, wl = np.polynomial.legendre.leggauss(n)
    v, wv = (1 + xl) / 2, wl / 2
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1 - U)).ravel()])
    w = np.outer(wu, wv).ravel()
    return QuadratureRule(pts, w, 2 * n - 1)


@lru_cache(maxsize=None)
def edge_quadrature(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on the open interval (0, 1), exact to degree 2n - 1."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n_points)
    return QuadratureRule((1 + x) / 2, w / 2, 2 * n_points - 1)
