"""True-boundary geometry: normal gap, distance, edge classification.

Every geometry evaluates on arrays of points of shape ``(N, 2)``.  The gap
``signed_delta(x, n)`` is the smallest-magnitude ``s`` with ``x + s n`` on the
true boundary; it is positive where the polygon lies inside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .quadrature import edge_quadrature


class GeometryError(ValueError):
    pass


class AssumptionError(GeometryError):
    """The mesh violates a structural assumption on the boundary gap."""


@dataclass(frozen=True)
class ManufacturedSolution:
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    name: str = ""


def _r2(x):
    x = np.atleast_2d(x)
    return x[:, 0] ** 2 + x[:, 1] ** 2


def disc_solution(radius: float = 1.0) -> ManufacturedSolution:
    """u = 1 - (r/R)^6 with f = 36 r^4 / R^6 (vanishes on the circle)."""
    c = radius ** -6
    return ManufacturedSolution(
        u=lambda x: 1.0 - c * _r2(x) ** 3,
        grad_u=lambda x: -6.0 * c * (_r2(x) ** 2)[:, None] * np.atleast_2d(x),
        f=lambda x: 36.0 * c * _r2(x) ** 2,
        g=lambda x: np.zeros(len(np.atleast_2d(x))),
        name="disc",
    )


def annulus_solution() -> ManufacturedSolution:
    """u = r^2 - 5 r^4 + 4 r^6, vanishing on r = 1/2 and r = 1."""
    return ManufacturedSolution(
        u=lambda x: _r2(x) - 5.0 * _r2(x) ** 2 + 4.0 * _r2(x) ** 3,
        grad_u=lambda x: (2.0 - 20.0 * _r2(x) + 24.0 * _r2(x) ** 2)[:, None] * np.atleast_2d(x),
        f=lambda x: -4.0 + 80.0 * _r2(x) - 144.0 * _r2(x) ** 2,
        g=lambda x: np.zeros(len(np.atleast_2d(x))),
        name="annulus",
    )


def square_solution() -> ManufacturedSolution:
    """u = sin(pi x) sin(pi y) on the unit square."""
    pi = np.pi

    def u(x):
        x = np.atleast_2d(x)
        return np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])

    def grad_u(x):
        x = np.atleast_2d(x)
        return pi * np.column_stack([np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1]),
                                     np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1])])

    return ManufacturedSolution(u, grad_u, lambda x: 2 * pi ** 2 * u(x),
                                lambda x: np.zeros(len(np.atleast_2d(x))), name="square")


def _circle_roots(x, n, center_r2_minus, rho):
    """Both roots of |x + s n|^2 = rho^2; NaN where the line misses."""
    b = np.einsum("ij,ij->i", x, n)
    c = center_r2_minus - rho ** 2
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    # numerically stable pair: q and c / q
    q = -(b + np.where(b >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = q
        s2 = np.where(q != 0, c / q, -q)
    s1 = np.where(ok, s1, np.nan)
    s2 = np.where(ok, s2, np.nan)
    return s1, s2


def _pick_smallest(cands: np.ndarray) -> np.ndarray:
    """Smallest |s| per row, ties broken toward positive s."""
    a = np.where(np.isnan(cands), np.inf, np.abs(cands))
    best = a.min(axis=1)
    tie = np.isclose(a, best[:, None], rtol=0, atol=0) & (cands > 0)
    idx = np.where(tie.any(axis=1), np.argmax(tie, axis=1), np.argmin(a, axis=1))
    out = cands[np.arange(len(cands)), idx]
    return np.where(np.isfinite(best), out, np.nan)


class DomainGeometry:
    """Base class; subclasses provide ``_delta_candidates``, ``dist`` and ``contains``."""

    solution: ManufacturedSolution | None = None

    def _delta_candidates(self, x, n) -> np.ndarray:
        raise NotImplementedError

    def signed_delta(self, x, n, max_abs: float | None = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = np.broadcast_to(np.atleast_2d(np.asarray(n, dtype=float)), x.shape)
        s = _pick_smallest(self._delta_candidates(x, n))
        if np.isnan(s).any() or (max_abs is not None and np.any(np.abs(s) > max_abs)):
            raise GeometryError("normal ray misses boundary")
        return s

    def dist(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def ghat(self, x, n) -> np.ndarray:
        """Boundary data transported from the true boundary along the normal."""
        if self.solution is None:
            raise GeometryError("geometry has no boundary data attached")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = self.signed_delta(x, n)
        return self.solution.g(x + s[:, None] * np.broadcast_to(n, x.shape))


@dataclass(frozen=True)
class Disc(DomainGeometry):
    radius: float = 1.0
    solution: ManufacturedSolution | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("radius must be positive")

    def _delta_candidates(self, x, n):
        return np.column_stack(_circle_roots(x, n, _r2(x), self.radius))

    def dist(self, x):
        return np.abs(self.radius - np.sqrt(_r2(x)))

    def contains(self, x):
        return _r2(x) <= self.radius ** 2


@dataclass(frozen=True)
class Annulus(DomainGeometry):
    R_inner: float = 0.5
    R_outer: float = 1.0
    solution: ManufacturedSolution | None = None

    def __post_init__(self):
        if not 0 < self.R_inner < self.R_outer:
            raise GeometryError("require 0 < R_inner < R_outer")

    def _delta_candidates(self, x, n):
        r2 = _r2(x)
        return np.column_stack(_circle_roots(x, n, r2, self.R_inner) + _circle_roots(x, n, r2, self.R_outer))

    def dist(self, x):
        r = np.sqrt(_r2(x))
        return np.minimum(np.abs(self.R_outer - r), np.abs(r - self.R_inner))

    def contains(self, x):
        r2 = _r2(x)
        return (r2 >= self.R_inner ** 2) & (r2 <= self.R_outer ** 2)


@dataclass(frozen=True)
class Square(DomainGeometry):
    """``[0, side]^2``; a polygonal domain is its own approximation (gap zero)."""

    side: float = 1.0
    solution: ManufacturedSolution | None = None

    def signed_delta(self, x, n, max_abs=None):
        return np.zeros(len(np.atleast_2d(x)))

    def dist(self, x):
        x = np.atleast_2d(x)
        inside = np.minimum.reduce([x[:, 0], x[:, 1], self.side - x[:, 0], self.side - x[:, 1]])
        return np.abs(inside)

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all((x >= 0) & (x <= self.side), axis=1)


@dataclass(frozen=True)
class CubicGraph(DomainGeometry):
    """``{-1 < x < 1, -2 < y < x**3}``; top boundary has an inflection at 0.

    Only meant as a fixture for the tangency diagnostics.
    """

    solution: ManufacturedSolution | None = None

    def _on_straight(self, x):
        return (np.abs(x[:, 1] + 2) < 1e-12) | (np.abs(np.abs(x[:, 0]) - 1) < 1e-12)

    def _delta_candidates(self, x, n):
        out = np.full((len(x), 3), np.nan)
        for i, ((px, py), (nx, ny)) in enumerate(zip(x, n)):
            if self._on_straight(x[i:i + 1])[0]:
                out[i, 0] = 0.0
                continue
            r = np.roots([nx ** 3, 3 * px * nx ** 2, 3 * px ** 2 * nx - ny, px ** 3 - py])
            r = r[np.abs(r.imag) < 1e-9].real
            out[i, :len(r)] = r
        return out

    def dist(self, x):
        x = np.atleast_2d(x)
        out = np.empty(len(x))
        for i, (px, py) in enumerate(x):
            best = min(abs(py + 2), abs(px - 1), abs(px + 1))
            r = np.roots([3.0, 0, 0, -3 * py, 1.0, -px])
            for t in r[np.abs(r.imag) < 1e-9].real:
                if -1 <= t <= 1:
                    best = min(best, float(np.hypot(t - px, t ** 3 - py)))
            out[i] = best
        return out

    def contains(self, x):
        x = np.atleast_2d(x)
        return (np.abs(x[:, 0]) <= 1) & (x[:, 1] >= -2) & (x[:, 1] <= x[:, 0] ** 3)


# ---------------------------------------------------------------- functional API

def signed_delta(geometry: DomainGeometry, x, n, max_abs=None) -> np.ndarray:
    return geometry.signed_delta(x, n, max_abs)


def dist(geometry: DomainGeometry, x) -> np.ndarray:
    return geometry.dist(x)


def ghat(geometry: DomainGeometry, x, n) -> np.ndarray:
    return geometry.ghat(x, n)


class BoundaryDecomposition(NamedTuple):
    gamma_plus: np.ndarray
    gamma_minus: np.ndarray
    gamma_zero: np.ndarray
    sign: np.ndarray  # +1, -1 or 0 per boundary edge

    @property
    def gamma(self) -> np.ndarray:
        return np.flatnonzero(self.sign != 0)


def edge_points(mesh, n_points: int):
    """Gauss points on every boundary edge: ``(B, n, 2)`` plus the 1-D rule."""
    rule = edge_quadrature(n_points)
    p = mesh.vertices[mesh.boundary_edges]
    s = rule.points
    pts = p[:, None, 0] * (1 - s)[None, :, None] + p[:, None, 1] * s[None, :, None]
    return pts, rule


def boundary_delta(mesh, geometry: DomainGeometry, n_points: int) -> np.ndarray:
    """Gap at the Gauss points of every boundary edge, shape ``(B, n)``."""
    pts, _ = edge_points(mesh, n_points)
    normals = np.repeat(mesh.boundary_normals, n_points, axis=0)
    return geometry.signed_delta(pts.reshape(-1, 2), normals, max_abs=10 * mesh.hmax).reshape(pts.shape[:2])


def classify_boundary(mesh, geometry: DomainGeometry, n_points: int = 5,
                      zero_tol: float = 1e-14) -> BoundaryDecomposition:
    delta = boundary_delta(mesh, geometry, n_points)
    scale = zero_tol * mesh.boundary_lengths[:, None]
    pos = (delta > scale).any(axis=1)
    neg = (delta < -scale).any(axis=1)
    bad = np.flatnonzero(pos & neg)
    if len(bad):
        raise AssumptionError(f"edge changes delta-sign: boundary edge {bad[0]}")
    sign = pos.astype(int) - neg.astype(int)
    return BoundaryDecomposition(np.flatnonzero(sign > 0), np.flatnonzero(sign < 0),
                                 np.flatnonzero(sign == 0), sign)


def check_assumption1(mesh, geometry: DomainGeometry, n_points: int = 5) -> float:
    """Max of |x - x0| |x - x1| / |delta(x)| over Gauss points of curved edges.

    Returns 0 when there are no curved edges and ``inf`` if the gap vanishes
    at an interior Gauss point of a curved edge.
    """
    dec = classify_boundary(mesh, geometry, n_points)
    edges = dec.gamma
    if len(edges) == 0:
        return 0.0
    delta = boundary_delta(mesh, geometry, n_points)[edges]
    rule = edge_quadrature(n_points)
    h = mesh.boundary_lengths[edges][:, None]
    prod = (rule.points * (1 - rule.points))[None, :] * h ** 2
    if np.any(delta == 0):
        return float("inf")
    return float(np.max(prod / np.abs(delta)))


def laplacian_residual(solution: ManufacturedSolution, x, step: float = 1e-5) -> np.ndarray:
    """Relative residual of -Laplace(u) - f by central differences.

    The stencil is evaluated in extended precision where the platform has
    it: in doubles its rounding noise, about eps * |u| / step**2, is 1e-5
    for the default step.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.longdouble))
    ex = np.array([step, 0.0], dtype=np.longdouble)
    ey = np.array([0.0, step], dtype=np.longdouble)
    u = solution.u
    lap = (u(x + ex) + u(x - ex) + u(x + ey) + u(x - ey) - 4 * u(x)) / np.longdouble(step) ** 2
    f = solution.f(x)
    return (np.abs(-lap - f) / np.maximum(np.abs(f), 1.0)).astype(float)


def make_geometry(domain: str, radius: float = 1.0, inner_radius: float = 0.5) -> DomainGeometry:
    if domain == "disc":
        return Disc(radius, disc_solution(radius))
    if domain == "annulus":
        sol = annulus_solution() if (inner_radius, radius) == (0.5, 1.0) else None
        return Annulus(inner_radius, radius, sol)
    if domain == "square":
        return Square(1.0, square_solution())
    raise GeometryError(f"unknown domain {domain!r}")
