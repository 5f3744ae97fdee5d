"""Lagrange P1-P5 elements on triangles, degree-of-freedom maps, FE functions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .geometry import classify_boundary
from .mesh import _edge_ids

MAX_DEGREE = 5

# dof classes
INTERIOR, BOUNDARY_VERTEX, GAMMA0_EDGE, GAMMA_EDGE = 0, 1, 2, 3


def _lattice(k: int) -> np.ndarray:
    """Integer barycentric multi-indices: vertices, then edges, then interior.

    Local edge ``e`` is opposite local vertex ``e``; its nodes run from
    vertex ``(e+1) % 3`` towards vertex ``(e+2) % 3``.
    """
    nodes = [(k, 0, 0), (0, k, 0), (0, 0, k)]
    for e in range(3):
        a, b = (e + 1) % 3, (e + 2) % 3
        for j in range(1, k):
            m = [0, 0, 0]
            m[a], m[b] = k - j, j
            nodes.append(tuple(m))
    for j in range(1, k):
        for i in range(1, k - j):
            nodes.append((k - i - j, i, j))
    return np.array(nodes, dtype=np.int64).reshape(-1, 3)


def _factor_tables(k: int, lam: np.ndarray):
    """P_n(l) = prod_{j<n} (k l - j) / (j + 1) and its derivative for n = 0..k.

    ``lam`` has shape (npts, 3); both outputs have shape (npts, 3, k + 1).
    """
    t = k * lam[..., None] - np.arange(k)  # (npts, 3, k)
    frac = t / np.arange(1, k + 1)
    val = np.ones(lam.shape + (k + 1,))
    der = np.zeros(lam.shape + (k + 1,))
    for n in range(1, k + 1):
        val[..., n] = val[..., n - 1] * frac[..., n - 1]
        der[..., n] = der[..., n - 1] * frac[..., n - 1] + val[..., n - 1] * k / n
    return val, der


class LagrangeBasis:
    """Equispaced Lagrange basis of degree ``k`` on the reference triangle.

    Shape functions use the barycentric product form
    ``phi_m = prod_i P_{m_i}(lambda_i)``, which is exact at the nodes and
    avoids inverting an ill-conditioned Vandermonde matrix.
    """

    def __init__(self, k: int):
        if not 1 <= k <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {k}")
        self.k = k
        self.lattice = _lattice(k)
        self.nodes = self.lattice / k  # barycentric
        self.ref_nodes = self.nodes[:, 1:]

    @property
    def n(self) -> int:
        return len(self.lattice)

    def _tables(self, ref_points):
        p = np.atleast_2d(np.asarray(ref_points, dtype=float))
        lam = np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])
        val, der = _factor_tables(self.k, lam)
        m = self.lattice
        # factor i of every shape function at every point, (npts, nbasis)
        f = [val[:, i, m[:, i]] for i in range(3)]
        df = [der[:, i, m[:, i]] for i in range(3)]
        return f, df

    def values(self, ref_points) -> np.ndarray:
        """Shape functions at reference points, ``(npts, nbasis)``."""
        f, _ = self._tables(ref_points)
        return f[0] * f[1] * f[2]

    def gradients(self, ref_points) -> np.ndarray:
        """Reference gradients, ``(npts, nbasis, 2)``."""
        f, df = self._tables(ref_points)
        d0 = df[0] * f[1] * f[2]
        dx = f[0] * df[1] * f[2] - d0
        dy = f[0] * f[1] * df[2] - d0
        return np.stack([dx, dy], axis=-1)


@lru_cache(maxsize=None)
def reference_basis(k: int) -> LagrangeBasis:
    return LagrangeBasis(k)


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Affine maps x = v0 + J xi of all triangles."""

    v0: np.ndarray
    J: np.ndarray
    Jinv: np.ndarray
    detJ: np.ndarray

    @classmethod
    def of(cls, mesh) -> "CellGeometry":
        p = mesh.vertices[mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0], inv[:, 1, 1] = J[:, 1, 1] / det, J[:, 0, 0] / det
        inv[:, 0, 1], inv[:, 1, 0] = -J[:, 0, 1] / det, -J[:, 1, 0] / det
        return cls(p[:, 0], J, inv, det)

    def to_physical(self, ref_points, cells=None):
        sl = slice(None) if cells is None else cells
        return self.v0[sl, None, :] + np.einsum("tij,qj->tqi", self.J[sl], np.atleast_2d(ref_points))


class DofMap:
    """Global numbering of Lagrange nodes over a mesh.

    Vertex dofs come first (index = vertex index), then ``k - 1`` dofs per
    edge (ordered from the lower to the higher vertex index), then the
    interior dofs of each triangle.
    """

    def __init__(self, mesh, k: int, decomposition=None):
        self.mesh = mesh
        self.k = k
        self.basis = reference_basis(k)
        self.decomposition = decomposition
        nv, ne, nt = mesh.n_vertices, len(mesh.edges), mesh.n_triangles
        n_int = (k - 1) * (k - 2) // 2
        self.n_dofs = nv + (k - 1) * ne + n_int * nt

        tri = mesh.triangles
        tedge = mesh.triangle_edges
        dofs = np.empty((nt, self.basis.n), dtype=np.int64)
        interior_count = 0
        for i, m in enumerate(self.basis.lattice):
            nz = np.flatnonzero(m)
            if len(nz) == 1:
                dofs[:, i] = tri[:, nz[0]]
            elif len(nz) == 2:
                e = 3 - nz.sum()  # local edge is opposite the missing vertex
                va, vb = tri[:, nz[0]], tri[:, nz[1]]
                m_hi = np.where(va > vb, m[nz[0]], m[nz[1]])
                dofs[:, i] = nv + (k - 1) * tedge[:, e] + m_hi - 1
            else:
                dofs[:, i] = nv + (k - 1) * ne + n_int * np.arange(nt) + interior_count
                interior_count += 1
        self.cell_dofs = dofs

    @cached_property
    def coordinates(self) -> np.ndarray:
        cg = CellGeometry.of(self.mesh)
        x = cg.to_physical(self.basis.ref_nodes)
        out = np.empty((self.n_dofs, 2))
        out[self.cell_dofs.ravel()] = x.reshape(-1, 2)
        return out

    @cached_property
    def boundary_edge_dofs(self) -> np.ndarray:
        """Dofs of each boundary edge's owner triangle that lie on that edge, ``(B, k+1)``."""
        mesh = self.mesh
        local = mesh.local_edge_of_boundary()
        lat = self.basis.lattice
        out = np.empty((mesh.n_boundary_edges, self.k + 1), dtype=np.int64)
        for e in range(3):
            on_edge = np.flatnonzero(lat[:, e] == 0)
            sel = local == e
            out[sel] = self.cell_dofs[mesh.boundary_owner[sel]][:, on_edge]
        return out

    @cached_property
    def dof_class(self) -> np.ndarray:
        cls = np.full(self.n_dofs, INTERIOR, dtype=np.int8)
        mesh = self.mesh
        k = self.k
        if k > 1:
            key = np.sort(mesh.boundary_edges, axis=1)
            gid = _edge_ids(mesh.edges, key)
            sign = (np.ones(len(gid), dtype=int) if self.decomposition is None
                    else self.decomposition.sign)
            base = mesh.n_vertices + (k - 1) * gid
            for j in range(k - 1):
                cls[base + j] = np.where(sign == 0, GAMMA0_EDGE, GAMMA_EDGE)
        cls[mesh.boundary_vertices] = BOUNDARY_VERTEX
        return cls

    def dofs_of_class(self, *classes) -> np.ndarray:
        return np.flatnonzero(np.isin(self.dof_class, classes))

    @property
    def boundary_dofs(self) -> np.ndarray:
        return self.dofs_of_class(BOUNDARY_VERTEX, GAMMA0_EDGE, GAMMA_EDGE)

    def gamma0_dofs(self) -> np.ndarray:
        """Dofs lying on straight (gap-free) boundary edges, endpoints included."""
        if self.decomposition is None:
            return np.empty(0, dtype=np.int64)
        edges = self.decomposition.gamma_zero
        return np.unique(self.boundary_edge_dofs[edges])


def build_dofmap(mesh, k: int, geometry=None) -> DofMap:
    dec = None
    if geometry is not None:
        dec = classify_boundary(mesh, geometry, n_points=k + 2)
    return DofMap(mesh, k, dec)


@dataclass(eq=False)
class FeFunction:
    dofmap: DofMap
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.dofmap.n_dofs,):
            raise ValueError(f"expected {self.dofmap.n_dofs} coefficients, got {self.coefficients.shape}")

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        if other.dofmap is not self.dofmap:
            raise ValueError("FE functions live on different dof maps")
        return FeFunction(self.dofmap, self.coefficients - other.coefficients)

    def evaluate(self, triangle: int, bary) -> tuple[float, np.ndarray]:
        return evaluate(self, triangle, bary)

    def vertex_values(self) -> np.ndarray:
        return self.coefficients[: self.dofmap.mesh.n_vertices]


def interpolate(target, dofmap: DofMap) -> FeFunction:
    """Lagrange interpolant: coefficients are ``target`` at the global nodes."""
    return FeFunction(dofmap, np.asarray(target(dofmap.coordinates), dtype=float))


def evaluate(u: FeFunction, triangle: int, bary) -> tuple[float, np.ndarray]:
    """Value and physical gradient of ``u`` at a barycentric point of a triangle."""
    mesh = u.dofmap.mesh
    if not 0 <= triangle < mesh.n_triangles:
        raise IndexError(f"triangle {triangle} out of range")
    bary = np.asarray(bary, dtype=float)
    ref = bary[1:][None, :]
    basis = u.dofmap.basis
    c = u.coefficients[u.dofmap.cell_dofs[triangle]]
    p = mesh.vertices[mesh.triangles[triangle]]
    J = np.column_stack([p[1] - p[0], p[2] - p[0]])
    value = float(basis.values(ref)[0] @ c)
    grad_ref = basis.gradients(ref)[0].T @ c
    return value, np.linalg.solve(J.T, grad_ref)


def export_csv(u: FeFunction, path) -> None:
    """Write ``dof_index,x,y,value`` rows."""
    xy = u.dofmap.coordinates
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dof_index", "x", "y", "value"])
        for i, ((x, y), v) in enumerate(zip(xy.tolist(), u.coefficients.tolist())):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])


def locate(mesh, points, candidates: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Triangle index and barycentric coordinates of each point.

    Points outside the mesh (for example in the thin region between a chord
    and the true boundary) get the nearest candidate triangle, so evaluating
    there extrapolates that triangle's polynomial.
    """
    from scipy.spatial import cKDTree

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cg = CellGeometry.of(mesh)
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    nc = min(candidates, mesh.n_triangles)
    _, cand = cKDTree(centroids).query(pts, k=nc)
    cand = np.asarray(cand).reshape(len(pts), nc)
    ref = np.einsum("pcij,pcj->pci", cg.Jinv[cand], pts[:, None, :] - cg.v0[cand])
    bary = np.concatenate([1.0 - ref.sum(axis=-1, keepdims=True), ref], axis=-1)
    best = np.argmax(bary.min(axis=-1), axis=1)
    rows = np.arange(len(pts))
    return cand[rows, best], bary[rows, best]


def point_values(u: FeFunction, points) -> np.ndarray:
    """Values of ``u`` at arbitrary points (see ``locate`` for points off the mesh)."""
    tri, bary = locate(u.dofmap.mesh, points)
    phi = u.dofmap.basis.values(bary[:, 1:])
    return np.einsum("pn,pn->p", phi, u.coefficients[u.dofmap.cell_dofs[tri]])
