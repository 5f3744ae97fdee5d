"""Assembly of the four discretisations on the polygonal domain.

* ``plain``: standard Galerkin with all boundary dofs set from ``g``.
* ``bdt``: Nitsche's method with a first-order Taylor shift of the boundary
  condition (nonsymmetric).
* ``robin``: gradient-free Robin-type correction ``a + c_eps`` with weight
  ``1 / (eps * sign(delta) + delta)`` on curved edges (symmetric).
* ``bdt_symmetric``: symmetrised variant of ``bdt``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .femcore import CellGeometry, DofMap, FeFunction
from .geometry import DomainGeometry, GeometryError
from .linalg import LinearSystem, apply_constraints, to_csr
from .quadrature import edge_quadrature, triangle_quadrature

METHODS = ("plain", "bdt", "robin", "bdt_symmetric")
F_EXTENSIONS = ("analytic", "linear_interpolant")


@dataclass(frozen=True)
class MethodConfig:
    method: str = "robin"
    k: int = 2
    gamma: float = 100.0
    epsilon: float = 1e-13
    f_extension: str = "analytic"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 1 <= self.k <= 5:
            raise ValueError("k must be in 1..5")
        if self.method in ("bdt", "bdt_symmetric") and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.f_extension not in F_EXTENSIONS:
            raise ValueError(f"unknown f extension {self.f_extension!r}")


class BoundaryTrace:
    """Basis values and normal derivatives at the Gauss points of boundary edges.

    Arrays are indexed ``[edge, gauss point, local basis]``; ``dofs[edge]``
    are the owner triangle's global dofs.
    """

    def __init__(self, dofmap: DofMap, n_points: int | None = None):
        mesh = dofmap.mesh
        self.dofmap = dofmap
        n_points = dofmap.k + 2 if n_points is None else n_points
        rule = edge_quadrature(n_points)
        owner = mesh.boundary_owner
        tri = mesh.triangles[owner]
        be = mesh.boundary_edges
        loc0 = np.argmax(tri == be[:, :1], axis=1)
        loc1 = np.argmax(tri == be[:, 1:], axis=1)
        s = rule.points
        nb, nq = mesh.n_boundary_edges, len(s)
        bary = np.zeros((nb, nq, 3))
        rows = np.arange(nb)[:, None]
        bary[rows, np.arange(nq)[None, :], loc0[:, None]] = 1 - s
        bary[rows, np.arange(nq)[None, :], loc1[:, None]] = s
        ref = bary[..., 1:].reshape(-1, 2)
        basis = dofmap.basis
        self.phi = basis.values(ref).reshape(nb, nq, basis.n)
        gref = basis.gradients(ref).reshape(nb, nq, basis.n, 2)
        Jinv = CellGeometry.of(mesh).Jinv[owner]
        grad = np.einsum("bqnj,bji->bqni", gref, Jinv)
        self.normals = mesh.boundary_normals
        self.dn = np.einsum("bqni,bi->bqn", grad, self.normals)
        self.h = mesh.boundary_lengths
        self.weights = rule.weights[None, :] * self.h[:, None]
        p = mesh.vertices[be]
        self.points = p[:, None, 0] * (1 - s)[None, :, None] + p[:, None, 1] * s[None, :, None]
        self.dofs = dofmap.cell_dofs[owner]

    def delta(self, geometry: DomainGeometry) -> np.ndarray:
        nb, nq = self.points.shape[:2]
        normals = np.repeat(self.normals, nq, axis=0)
        d = geometry.signed_delta(self.points.reshape(-1, 2), normals, max_abs=10 * self.dofmap.mesh.hmax)
        return d.reshape(nb, nq)

    def form(self, test: np.ndarray, trial: np.ndarray, coef) -> np.ndarray:
        """Local matrices sum_q w_q coef_q test_i trial_j, shape (B, n, n)."""
        c = self.weights * coef
        return np.einsum("bq,bqi,bqj->bij", c, test, trial)

    def scatter(self, local: np.ndarray, n: int, edges=None) -> sp.csr_matrix:
        d = self.dofs if edges is None else self.dofs[edges]
        loc = local if edges is None else local[edges]
        rows = np.broadcast_to(d[:, :, None], loc.shape).ravel()
        cols = np.broadcast_to(d[:, None, :], loc.shape).ravel()
        return sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(n, n))


class Assembler:
    """Shared assembly data for one dof map and one true geometry."""

    def __init__(self, dofmap: DofMap, geometry: DomainGeometry | None = None,
                 quad_exactness: int | None = None):
        self.dofmap = dofmap
        self.geometry = geometry
        self.mesh = dofmap.mesh
        self.cells = CellGeometry.of(self.mesh)
        k = dofmap.k
        self.rule = triangle_quadrature(2 * k + 2 if quad_exactness is None else quad_exactness)
        self.phi = dofmap.basis.values(self.rule.points)
        self.dphi = dofmap.basis.gradients(self.rule.points)

    @property
    def n(self) -> int:
        return self.dofmap.n_dofs

    @cached_property
    def trace(self) -> BoundaryTrace:
        return BoundaryTrace(self.dofmap)

    @cached_property
    def delta(self) -> np.ndarray:
        return self.trace.delta(self.geometry)

    def _scatter(self, local: np.ndarray) -> sp.csr_matrix:
        d = self.dofmap.cell_dofs
        rows = np.broadcast_to(d[:, :, None], local.shape).ravel()
        cols = np.broadcast_to(d[:, None, :], local.shape).ravel()
        return to_csr(sp.coo_matrix((local.ravel(), (rows, cols)), shape=(self.n, self.n)))

    def stiffness(self) -> sp.csr_matrix:
        w = self.rule.weights
        S = np.einsum("q,qia,qjb->abij", w, self.dphi, self.dphi)
        Jinv = self.cells.Jinv
        G = np.einsum("tai,tbi->tab", Jinv, Jinv)
        local = np.abs(self.cells.detJ)[:, None, None] * np.einsum("tab,abij->tij", G, S)
        return self._scatter(local)

    def mass(self) -> sp.csr_matrix:
        M = np.einsum("q,qi,qj->ij", self.rule.weights, self.phi, self.phi)
        local = np.abs(self.cells.detJ)[:, None, None] * M[None]
        return self._scatter(local)

    def source_values(self, f, f_extension: str = "analytic") -> np.ndarray:
        """Extended source at the triangle quadrature points, shape (nt, nq)."""
        x = self.cells.to_physical(self.rule.points)
        nt, nq = x.shape[:2]
        F = np.asarray(f(x.reshape(-1, 2)), dtype=float).reshape(nt, nq)
        if f_extension == "linear_interpolant":
            if self.geometry is None:
                raise GeometryError("linear_interpolant extension needs a geometry")
            outside = ~self.geometry.contains(x.reshape(-1, 2)).reshape(nt, nq)
            if outside.any():
                fv = np.asarray(f(self.mesh.vertices), dtype=float)[self.mesh.triangles]
                p = self.rule.points
                lam = np.column_stack([1 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])
                F = np.where(outside, fv @ lam.T, F)
        return F

    def load(self, f, f_extension: str = "analytic") -> np.ndarray:
        F = self.source_values(f, f_extension)
        local = np.abs(self.cells.detJ)[:, None] * np.einsum("q,tq,qi->ti", self.rule.weights, F, self.phi)
        return np.bincount(self.dofmap.cell_dofs.ravel(), local.ravel(), minlength=self.n)


def _solution(geometry):
    if geometry is None or geometry.solution is None:
        raise GeometryError("geometry has no manufactured solution attached")
    return geometry.solution


def assemble_stiffness(dofmap: DofMap) -> sp.csr_matrix:
    return Assembler(dofmap).stiffness()


def assemble_mass(dofmap: DofMap) -> sp.csr_matrix:
    return Assembler(dofmap).mass()


def assemble_load(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry) -> np.ndarray:
    return Assembler(dofmap, geometry).load(_solution(geometry).f, config.f_extension)


def assemble_plain_dirichlet(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry,
                             assembler: Assembler | None = None) -> LinearSystem:
    asm = assembler or Assembler(dofmap, geometry)
    sol = _solution(geometry)
    A = asm.stiffness()
    b = asm.load(sol.f, config.f_extension)
    dofs = np.unique(dofmap.boundary_edge_dofs)
    values = sol.g(dofmap.coordinates[dofs])
    A, b = apply_constraints(A, b, dofs, values, symmetric=True)
    return LinearSystem(A, b, dofs, values, symmetric=True)


def _bdt_boundary(asm: Assembler, gamma: float, symmetric: bool) -> sp.csr_matrix:
    tr = asm.trace
    delta = asm.delta
    pen = gamma / tr.h[:, None]
    phi, dn = tr.phi, tr.dn
    if symmetric:
        c = pen * delta - 1.0
        local = (tr.form(dn, dn, c * delta) + tr.form(phi, dn, c) + tr.form(dn, phi, c)
                 + tr.form(phi, phi, pen))
    else:
        local = (-tr.form(phi, dn, 1.0) - tr.form(dn, phi, 1.0) - tr.form(dn, dn, delta)
                 + tr.form(phi, phi, pen) + tr.form(phi, dn, pen * delta))
    return tr.scatter(local, asm.n)


def assemble_bdt(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry,
                 assembler: Assembler | None = None) -> LinearSystem:
    """Nonsymmetric shifted-Nitsche system on the full space (data g = 0)."""
    asm = assembler or Assembler(dofmap, geometry)
    sol = _solution(geometry)
    A = to_csr(asm.stiffness() + _bdt_boundary(asm, config.gamma, symmetric=False))
    b = asm.load(sol.f, config.f_extension)
    return LinearSystem(A, b, symmetric=False)


def assemble_bdt_symmetric(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry,
                           assembler: Assembler | None = None) -> LinearSystem:
    asm = assembler or Assembler(dofmap, geometry)
    sol = _solution(geometry)
    A = to_csr(asm.stiffness() + _bdt_boundary(asm, config.gamma, symmetric=True))
    b = asm.load(sol.f, config.f_extension)
    return LinearSystem(A, b, symmetric=True)


def robin_weight(delta: np.ndarray, sign: np.ndarray, epsilon: float) -> np.ndarray:
    """1 / (eps * sign + delta) with sign taken per edge."""
    denom = epsilon * sign[:, None] + delta
    bad = np.argwhere(denom == 0)
    if len(bad):
        raise GeometryError(f"zero gap at a quadrature point of boundary edge {bad[0, 0]}")
    return 1.0 / denom


def robin_boundary(asm: Assembler, epsilon: float):
    """Boundary matrix and weight of the regularised Robin term on curved edges."""
    tr = asm.trace
    dec = asm.dofmap.decomposition
    if dec is None:
        raise GeometryError("dof map carries no boundary decomposition")
    edges = dec.gamma
    w = np.zeros_like(asm.delta)
    w[edges] = robin_weight(asm.delta[edges], dec.sign[edges], epsilon)
    local = tr.form(tr.phi, tr.phi, w)
    return tr.scatter(local, asm.n, edges), w


def assemble_robin_eps(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry,
                       assembler: Assembler | None = None) -> LinearSystem:
    """Symmetric Robin-type system; straight edges carry strong data ``g``."""
    asm = assembler or Assembler(dofmap, geometry)
    sol = _solution(geometry)
    C, w = robin_boundary(asm, config.epsilon)
    A = to_csr(asm.stiffness() + C)
    b = asm.load(sol.f, config.f_extension)
    tr = asm.trace
    edges = dofmap.decomposition.gamma
    if len(edges):
        nq = tr.points.shape[1]
        gh = geometry.ghat(tr.points[edges].reshape(-1, 2),
                           np.repeat(tr.normals[edges], nq, axis=0)).reshape(len(edges), nq)
        local = np.einsum("bq,bqi->bi", tr.weights[edges] * w[edges] * gh, tr.phi[edges])
        b += np.bincount(tr.dofs[edges].ravel(), local.ravel(), minlength=asm.n)
    dofs = dofmap.gamma0_dofs()
    values = sol.g(dofmap.coordinates[dofs])
    A, b = apply_constraints(A, b, dofs, values, symmetric=True)
    return LinearSystem(A, b, dofs, values, symmetric=True)


ASSEMBLERS = {
    "plain": assemble_plain_dirichlet,
    "bdt": assemble_bdt,
    "robin": assemble_robin_eps,
    "bdt_symmetric": assemble_bdt_symmetric,
}


def assemble(dofmap: DofMap, config: MethodConfig, geometry: DomainGeometry,
             assembler: Assembler | None = None) -> LinearSystem:
    return ASSEMBLERS[config.method](dofmap, config, geometry, assembler)


def as_function(dofmap: DofMap, x: np.ndarray) -> FeFunction:
    return FeFunction(dofmap, x)
