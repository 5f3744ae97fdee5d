"""Boundary-conforming triangulations of the disc and the annulus.

Meshes are built by a deterministic concentric-ring mesher: each ring carries
equally spaced vertices and neighbouring rings are stitched into triangles
with the shortest-diagonal rule.  All boundary vertices are generated at
exact angles on the true circles, so the polygonal domain is inscribed in
the smooth one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

MESH_HEADER = "curvefem-mesh v1"

# Interior spacing is INTERIOR_SPACING * R_outer / M.  With 4/3 the disc
# carries 0.75*M rings, a count that doubles exactly with M (for M a multiple
# of 4), and hmax at M=16 lands within 10% of the reference 0.135.
INTERIOR_SPACING = 4.0 / 3.0


class MeshError(ValueError):
    pass


class BoundaryEdge(NamedTuple):
    endpoints: tuple[int, int]
    owner_triangle: int
    normal: np.ndarray
    length: float


class MeshStats(NamedTuple):
    hmax: float
    hmin: float
    n_boundary_segments: int
    min_angle: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """Affine triangulation with boundary-edge adjacency.

    ``triangles`` are counterclockwise.  Boundary edges are stored as
    parallel arrays: ``boundary_edges[i]`` holds the endpoints of edge ``i``
    ordered counterclockwise around its owner triangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = field(default=None)
    boundary_owner: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))
        if self.boundary_edges is None:
            edges, owner = _find_boundary_edges(self.triangles)
            object.__setattr__(self, "boundary_edges", edges)
            object.__setattr__(self, "boundary_owner", owner)
        else:
            object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2))
            object.__setattr__(self, "boundary_owner", np.asarray(self.boundary_owner, dtype=np.int64))
        for name in ("vertices", "triangles", "boundary_edges", "boundary_owner"):
            getattr(self, name).setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_boundary_edges(self) -> int:
        return len(self.boundary_edges)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def _edge_tables(self):
        # local edge i is opposite local vertex i
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        key = np.sort(local, axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        return self._edge_tables[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Global edge index of each local edge (opposite local vertex i)."""
        return self._edge_tables[1]

    @property
    def edge_multiplicity(self) -> np.ndarray:
        return self._edge_tables[2]

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        """Unit outward normals of the boundary edges."""
        p = self.vertices[self.boundary_edges]
        t = p[:, 1] - p[:, 0]
        n = np.column_stack([t[:, 1], -t[:, 0]])
        n /= np.linalg.norm(n, axis=1)[:, None]
        centroid = self.vertices[self.triangles[self.boundary_owner]].mean(axis=1)
        mid = p.mean(axis=1)
        flip = np.einsum("ij,ij->i", n, mid - centroid) < 0
        n[flip] *= -1
        return n

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def hmax(self) -> float:
        return float(self.edge_lengths.max())

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def boundary_edge(self, i: int) -> BoundaryEdge:
        a, b = self.boundary_edges[i]
        return BoundaryEdge((int(a), int(b)), int(self.boundary_owner[i]),
                            self.boundary_normals[i].copy(), float(self.boundary_lengths[i]))

    def local_edge_of_boundary(self) -> np.ndarray:
        """Local index (0, 1, 2) of each boundary edge inside its owner triangle."""
        te = self.triangle_edges[self.boundary_owner]
        key = np.sort(self.boundary_edges, axis=1)
        gid = _edge_ids(self.edges, key)
        return np.argmax(te == gid[:, None], axis=1)


def _edge_ids(edges: np.ndarray, key: np.ndarray) -> np.ndarray:
    n = int(edges.max()) + 1 if len(edges) else 1
    code = edges[:, 0] * n + edges[:, 1]
    order = np.argsort(code)
    pos = np.searchsorted(code[order], key[:, 0] * n + key[:, 1])
    return order[np.clip(pos, 0, len(order) - 1)]


def _find_boundary_edges(triangles: np.ndarray):
    t = np.asarray(triangles)
    local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
    key = np.sort(local, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    single = np.flatnonzero(counts[inverse.ravel()] == 1)
    return local[single], single // 3


# ---------------------------------------------------------------- generation

def _ring(n: int, radius: float, offset: float = 0.0) -> np.ndarray:
    theta = 2.0 * np.pi * (np.arange(n) + offset) / n
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _stitch(inner: np.ndarray, outer: np.ndarray, pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the band between two closed rings of vertex indices."""
    na, nb = len(inner), len(outer)
    ang_a = np.arctan2(pts[inner[0], 1], pts[inner[0], 0])
    ang_b = np.arctan2(pts[outer, 1], pts[outer, 0])
    gap = np.abs((ang_b - ang_a + np.pi) % (2 * np.pi) - np.pi)
    jb = int(np.argmin(gap))
    outer = np.roll(outer, -jb)
    tris = []
    ia = ib = 0
    while ia < na or ib < nb:
        a, b = inner[ia % na], outer[ib % nb]
        a1, b1 = inner[(ia + 1) % na], outer[(ib + 1) % nb]
        if ib >= nb:
            advance_a = True
        elif ia >= na:
            advance_a = False
        else:
            diag_a = np.hypot(*(pts[a1] - pts[b]))
            diag_b = np.hypot(*(pts[a] - pts[b1]))
            advance_a = diag_a <= diag_b
        if advance_a:
            tris.append((a, b, a1))
            ia += 1
        else:
            tris.append((a, b, b1))
            ib += 1
    return tris


def _orient(pts: np.ndarray, tris) -> np.ndarray:
    t = np.array(tris, dtype=np.int64)
    p = pts[t]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    t[neg] = t[neg][:, [0, 2, 1]]
    return t


def _ring_counts(radii: np.ndarray, spacing: float) -> list[int]:
    return [max(3, int(round(2.0 * np.pi * r / spacing))) for r in radii]


def build_disc_mesh(M: int, n_boundary_segments: int, radius: float = 1.0) -> Mesh:
    """Concentric-ring triangulation of the disc of given radius.

    ``M`` sets the interior spacing (``INTERIOR_SPACING * radius / M``) and
    ``n_boundary_segments`` the number of equal chords on the circle.
    """
    if M < 1:
        raise MeshError("M must be >= 1")
    if n_boundary_segments < 3:
        raise MeshError("need at least 3 boundary segments")
    if radius <= 0:
        raise MeshError("radius must be positive")
    spacing = INTERIOR_SPACING * radius / M
    n_rings = max(1, int(round(radius / spacing)))
    radii = radius * np.arange(1, n_rings + 1) / n_rings
    counts = _ring_counts(radii[:-1], spacing) + [n_boundary_segments]

    pts = [np.zeros((1, 2))]
    rings = []
    start = 1
    for i, (r, n) in enumerate(zip(radii, counts)):
        offset = 0.5 * ((n_rings - 1 - i) % 2) if i < n_rings - 1 else 0.0
        pts.append(_ring(n, r, offset))
        rings.append(np.arange(start, start + n))
        start += n
    pts = np.vstack(pts)
    # exact boundary placement; the outer ring is the last block
    pts[rings[-1]] = _ring(n_boundary_segments, radius)

    first = rings[0]
    tris = [(0, first[j], first[(j + 1) % len(first)]) for j in range(len(first))]
    for a, b in zip(rings[:-1], rings[1:]):
        tris += _stitch(a, b, pts)
    return Mesh(pts, _orient(pts, tris))


def build_annulus_mesh(M: int, outer_segments: int, inner_segments: int,
                       R_inner: float = 0.5, R_outer: float = 1.0) -> Mesh:
    """Concentric-ring triangulation of ``R_inner < |x| < R_outer``."""
    if M < 1:
        raise MeshError("M must be >= 1")
    if outer_segments < 3 or inner_segments < 3:
        raise MeshError("need at least 3 segments on each circle")
    if not 0 < R_inner < R_outer:
        raise MeshError("require 0 < R_inner < R_outer")
    spacing = INTERIOR_SPACING * R_outer / M
    n_rings = max(1, int(round((R_outer - R_inner) / spacing)))
    radii = R_inner + (R_outer - R_inner) * np.arange(n_rings + 1) / n_rings
    counts = [inner_segments] + _ring_counts(radii[1:-1], spacing) + [outer_segments]

    pts, rings, start = [], [], 0
    for i, (r, n) in enumerate(zip(radii, counts)):
        offset = 0.5 * (i % 2) if 0 < i < n_rings else 0.0
        pts.append(_ring(n, r, offset))
        rings.append(np.arange(start, start + n))
        start += n
    pts = np.vstack(pts)
    tris = []
    for a, b in zip(rings[:-1], rings[1:]):
        tris += _stitch(a, b, pts)
    return Mesh(pts, _orient(pts, tris))


def disc_mesh_for(M: int, radius: float = 1.0) -> Mesh:
    """Disc mesh with the 5M boundary-segment rule."""
    return build_disc_mesh(M, 5 * M, radius)


def annulus_mesh_for(M: int, R_inner: float = 0.5, R_outer: float = 1.0) -> Mesh:
    """Annulus mesh with 4M outer and 2M inner boundary segments."""
    return build_annulus_mesh(M, 4 * M, 2 * M, R_inner, R_outer)


def build_square_mesh(n: int, side: float = 1.0) -> Mesh:
    """Structured mesh of ``[0, side]^2``; its own polygon is the true domain."""
    if n < 1:
        raise MeshError("n must be >= 1")
    x = np.linspace(0.0, side, n + 1)
    X, Y = np.meshgrid(x, x)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.vstack([np.column_stack([a, b, d]), np.column_stack([a, d, c])])
    return Mesh(pts, tris)


def build_cubic_fixture_mesh(n: int) -> Mesh:
    """Structured mesh of ``{-1 < x < 1, -2 < y < x**3}``.

    The top boundary vertices sit on the curve ``y = x**3``; for even ``n``
    one of them is the inflection point at the origin, where the chords
    become asymptotically tangent to the curve.
    """
    if n < 2:
        raise MeshError("n must be >= 2")
    x = np.linspace(-1.0, 1.0, n + 1)
    s = np.linspace(0.0, 1.0, n + 1)
    X, S = np.meshgrid(x, s)
    Y = -2.0 + S * (2.0 + X ** 3)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tris = np.vstack([np.column_stack([a, b, d]), np.column_stack([a, d, c])])
    return Mesh(pts, _orient(pts, tris))


# ---------------------------------------------------------------- diagnostics

def mesh_stats(mesh: Mesh) -> MeshStats:
    lengths = mesh.edge_lengths
    p = mesh.vertices[mesh.triangles]
    min_angle = np.inf
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        min_angle = min(min_angle, float(np.arccos(np.clip(cos, -1.0, 1.0)).min()))
    return MeshStats(float(lengths.max()), float(lengths.min()), mesh.n_boundary_edges, min_angle)


def validate_mesh(mesh: Mesh, geometry=None, tol: float = 1e-12) -> list[str]:
    """Return a list of human-readable invariant violations (empty if valid)."""
    out = []
    for t in np.flatnonzero(mesh.signed_areas <= 0):
        out.append(f"non-positive area: triangle {t}")
    mult = mesh.edge_multiplicity
    for e in np.flatnonzero(mult > 2):
        out.append(f"edge {tuple(mesh.edges[e])} shared by {mult[e]} triangles")
    computed = {tuple(sorted(e)) for e in _find_boundary_edges(mesh.triangles)[0].tolist()}
    stored = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    for e in sorted(computed ^ stored):
        out.append(f"boundary edge mismatch: {e}")
    lengths = mesh.edge_lengths
    if lengths.min() <= 0 or lengths.max() / lengths.min() > 10:
        out.append(f"quasi-uniformity: edge ratio {lengths.max() / max(lengths.min(), 1e-300):.3g} > 10")
    if geometry is not None:
        bv = mesh.boundary_vertices
        d = geometry.dist(mesh.vertices[bv])
        for v, dv in zip(bv[d >= tol], d[d >= tol]):
            out.append(f"vertex off boundary: vertex {v} at distance {dv:.3g}")
    return out


# ---------------------------------------------------------------- file format

def write_mesh(mesh: Mesh, path) -> None:
    lines = [MESH_HEADER, f"vertices {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"boundary_edges {mesh.n_boundary_edges}")
    lines += [f"{i} {j} {o}" for (i, j), o in zip(mesh.boundary_edges.tolist(), mesh.boundary_owner.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text().splitlines()
    if not tokens or tokens[0].strip() != MESH_HEADER:
        raise MeshError(f"{path}: missing '{MESH_HEADER}' header")
    pos = 1

    def block(name, ncol, dtype):
        nonlocal pos
        head = tokens[pos].split()
        if len(head) != 2 or head[0] != name:
            raise MeshError(f"{path}: expected '{name} N' at line {pos + 1}")
        n = int(head[1])
        rows = [tokens[pos + 1 + i].split() for i in range(n)]
        pos += n + 1
        return np.array([[dtype(v) for v in r] for r in rows], dtype=dtype).reshape(n, ncol)

    verts = block("vertices", 2, float)
    tris = block("triangles", 3, int)
    bnd = block("boundary_edges", 3, int)
    return Mesh(verts, tris, bnd[:, :2], bnd[:, 2])


def equal_meshes(a: Mesh, b: Mesh) -> bool:
    return (np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)
            and np.array_equal(a.boundary_edges, b.boundary_edges)
            and np.array_equal(a.boundary_owner, b.boundary_owner))


__all__ = [
    "Mesh", "BoundaryEdge", "MeshStats", "MeshError", "build_disc_mesh", "build_annulus_mesh",
    "disc_mesh_for", "annulus_mesh_for", "build_square_mesh", "build_cubic_fixture_mesh",
    "mesh_stats", "validate_mesh", "write_mesh", "read_mesh", "equal_meshes",
]

