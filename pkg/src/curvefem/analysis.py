"""Error norms, convergence rates and the refinement-sweep driver."""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .femcore import FeFunction, build_dofmap, interpolate
from .geometry import DomainGeometry, make_geometry
from .linalg import solve
from .mesh import Mesh, annulus_mesh_for, disc_mesh_for
from .methods import Assembler, MethodConfig, assemble

logger = logging.getLogger(__name__)

REFERENCES = ("interpolant", "exact")
CSV_HEADER = ["k", "M", "hmax", "segs", "l2_err", "l2_rate", "h1_err", "h1_rate", "bdry_err", "bdry_rate"]


@dataclass
class ConvergenceRecord:
    k: int
    M: int
    hmax: float
    n_segments: int
    l2_error: float
    h1_error: float
    boundary_error: float
    l2_rate: float | None = None
    h1_rate: float | None = None
    boundary_rate: float | None = None
    epsilon: float | None = None
    info: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SweepConfig:
    method: MethodConfig
    domain: str = "disc"
    Ms: Sequence[int] = (16, 32, 64)
    radius: float = 1.0
    inner_radius: float = 0.5
    solver: str = "auto"
    reference: str = "exact"

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.Ms, self.Ms[1:])):
            raise ValueError("M list must be strictly increasing")
        if self.domain not in ("disc", "annulus"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown error reference {self.reference!r}")


@dataclass(eq=False)
class Solution:
    u_h: FeFunction
    u_I: FeFunction
    geometry: DomainGeometry
    assembler: Assembler
    system: object
    info: dict


# ---------------------------------------------------------------- norms

def _cell_coefficients(v: FeFunction) -> np.ndarray:
    return v.coefficients[v.dofmap.cell_dofs]


def _volume_norms(v: FeFunction, asm: Assembler) -> tuple[float, float]:
    c = _cell_coefficients(v)
    det = np.abs(asm.cells.detJ)
    w = asm.rule.weights
    vals = c @ asm.phi.T
    gref = np.einsum("tn,qna->tqa", c, asm.dphi)
    grad = np.einsum("tqa,tai->tqi", gref, asm.cells.Jinv)
    l2 = float(np.sum(det[:, None] * w[None, :] * vals ** 2))
    semi = float(np.sum(det[:, None] * w[None, :] * np.sum(grad ** 2, axis=-1)))
    return l2, semi


def boundary_error(v: FeFunction, asm: Assembler) -> float:
    """(integral over curved edges of v^2 / |delta|)^(1/2)."""
    dec = v.dofmap.decomposition
    edges = dec.gamma if dec is not None else np.arange(v.dofmap.mesh.n_boundary_edges)
    if len(edges) == 0:
        return 0.0
    tr = asm.trace
    vals = np.einsum("bqn,bn->bq", tr.phi[edges], v.coefficients[tr.dofs[edges]])
    return math.sqrt(float(np.sum(tr.weights[edges] * vals ** 2 / np.abs(asm.delta[edges]))))


def exact_volume_errors(u_h: FeFunction, solution, extra_exactness: int = 6) -> tuple[float, float]:
    """L2 and full H1 norms of ``u - u_h`` over the mesh, u given analytically."""
    k = u_h.dofmap.k
    asm = Assembler(u_h.dofmap, quad_exactness=2 * k + 2 + extra_exactness)
    c = _cell_coefficients(u_h)
    x = asm.cells.to_physical(asm.rule.points)
    shape = x.shape[:2]
    vals = c @ asm.phi.T
    grad = np.einsum("tqa,tai->tqi", np.einsum("tn,qna->tqa", c, asm.dphi), asm.cells.Jinv)
    w = np.abs(asm.cells.detJ)[:, None] * asm.rule.weights[None, :]
    du = solution.u(x.reshape(-1, 2)).reshape(shape) - vals
    dg = solution.grad_u(x.reshape(-1, 2)).reshape(shape + (2,)) - grad
    l2 = float(np.sum(w * du ** 2))
    semi = float(np.sum(w * np.sum(dg ** 2, axis=-1)))
    return math.sqrt(l2), math.sqrt(l2 + semi)


def error_norms(u_h: FeFunction, u_I: FeFunction, geometry: DomainGeometry,
                assembler: Assembler | None = None,
                reference: str = "interpolant") -> tuple[float, float, float]:
    """L2, full H1 and weighted boundary norms of ``u_h - u_I``.

    With ``reference="exact"`` the two volume norms measure ``u - u_h``
    instead, u being the manufactured solution of ``geometry``; the boundary
    norm is always taken against ``u_I``.
    """
    if u_h.dofmap is not u_I.dofmap:
        raise ValueError("u_h and u_I must share one dof map")
    if reference not in REFERENCES:
        raise ValueError(f"unknown error reference {reference!r}")
    asm = assembler or Assembler(u_h.dofmap, geometry)
    e = u_h - u_I
    bd = boundary_error(e, asm)
    if reference == "exact":
        return (*exact_volume_errors(u_h, geometry.solution), bd)
    l2, semi = _volume_norms(e, asm)
    return math.sqrt(l2), math.sqrt(l2 + semi), bd


def a_norm(v: FeFunction, assembler: Assembler | None = None) -> float:
    asm = assembler or Assembler(v.dofmap)
    return math.sqrt(_volume_norms(v, asm)[1])


def c_seminorm(v: FeFunction, assembler: Assembler) -> float:
    return boundary_error(v, assembler)


def triple_norm(v: FeFunction, geometry: DomainGeometry | None = None,
                assembler: Assembler | None = None) -> float:
    """sqrt(a(v,v) + sum_e h_e^-1 |v|_e^2 + h_e |dv/dn|_e^2) with local edge length h_e."""
    asm = assembler or Assembler(v.dofmap, geometry)
    _, semi = _volume_norms(v, asm)
    tr = asm.trace
    cb = v.coefficients[tr.dofs]
    vals = np.einsum("bqn,bn->bq", tr.phi, cb)
    dn = np.einsum("bqn,bn->bq", tr.dn, cb)
    h = tr.h[:, None]
    bnd = np.sum(tr.weights * (vals ** 2 / h + h * dn ** 2))
    return math.sqrt(semi + float(bnd))


# ---------------------------------------------------------------- rates

def rate(e_prev: float, e_cur: float, h_prev: float, h_cur: float) -> float | None:
    if not (e_prev > 0 and e_cur > 0):
        warnings.warn("non-positive error; rate omitted", RuntimeWarning, stacklevel=2)
        return None
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


def convergence_rates(records: list[ConvergenceRecord]) -> list[ConvergenceRecord]:
    if len(records) < 2:
        raise ValueError("need at least two records")
    out = [replace(records[0], l2_rate=None, h1_rate=None, boundary_rate=None)]
    for prev, cur in zip(records, records[1:]):
        out.append(replace(
            cur,
            l2_rate=rate(prev.l2_error, cur.l2_error, prev.hmax, cur.hmax),
            h1_rate=rate(prev.h1_error, cur.h1_error, prev.hmax, cur.hmax),
            boundary_rate=rate(prev.boundary_error, cur.boundary_error, prev.hmax, cur.hmax),
        ))
    return out


# ---------------------------------------------------------------- driver

def solve_problem(mesh: Mesh, geometry: DomainGeometry, config: MethodConfig,
                  solver: str = "auto") -> Solution:
    """Assemble and solve one method on one mesh; also returns the interpolant."""
    dofmap = build_dofmap(mesh, config.k, geometry)
    asm = Assembler(dofmap, geometry)
    system = assemble(dofmap, config, geometry, asm)
    x, info = solve(system, solver)
    u_h = FeFunction(dofmap, x)
    u_I = interpolate(geometry.solution.u, dofmap)
    return Solution(u_h, u_I, geometry, asm, system, info)


def sweep_mesh(domain: str, M: int, radius: float = 1.0, inner_radius: float = 0.5) -> Mesh:
    if domain == "disc":
        return disc_mesh_for(M, radius)
    return annulus_mesh_for(M, inner_radius, radius)


def run_level(config: SweepConfig, M: int, method: MethodConfig | None = None) -> ConvergenceRecord:
    method = method or config.method
    mesh = sweep_mesh(config.domain, M, config.radius, config.inner_radius)
    geometry = make_geometry(config.domain, config.radius, config.inner_radius)
    try:
        sol = solve_problem(mesh, geometry, method, config.solver)
    except Exception as exc:
        raise RuntimeError(f"solve failed at M={M}: {exc}") from exc
    l2, h1, bd = error_norms(sol.u_h, sol.u_I, geometry, sol.assembler, config.reference)
    logger.info("k=%d M=%d hmax=%.3g L2=%.3e H1=%.3e bdry=%.3e", method.k, M, mesh.hmax, l2, h1, bd)
    return ConvergenceRecord(method.k, M, mesh.hmax, mesh.n_boundary_edges, l2, h1, bd,
                             epsilon=method.epsilon if method.method == "robin" else None,
                             info=sol.info)


def run_sweep(config: SweepConfig, progress: Callable[[ConvergenceRecord], None] | None = None
              ) -> list[ConvergenceRecord]:
    records = []
    for M in config.Ms:
        rec = run_level(config, M)
        records.append(rec)
        if progress:
            progress(rec)
    return convergence_rates(records) if len(records) > 1 else records


def run_eps_sweep(config: SweepConfig, M: int, epsilons: Sequence[float]) -> list[ConvergenceRecord]:
    if not epsilons:
        raise ValueError("empty epsilon list")
    return [run_level(config, M, replace(config.method, method="robin", epsilon=eps)) for eps in epsilons]


# ---------------------------------------------------------------- output

def format_value(v, digits: int = 17) -> str:
    """The single number formatter: 17 significant digits for files, 3 for people."""
    if v is None:
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.{digits}g}"


def _row(r: ConvergenceRecord, digits: int, with_eps: bool):
    row = [r.k, r.M, r.hmax, r.n_segments, r.l2_error, r.l2_rate, r.h1_error, r.h1_rate,
           r.boundary_error, r.boundary_rate]
    if with_eps:
        row.insert(4, r.epsilon)
    return [format_value(v, digits) for v in row]


def records_to_csv(records: list[ConvergenceRecord], with_eps: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(CSV_HEADER)
    if with_eps:
        header.insert(4, "eps")
    w.writerow(header)
    for r in records:
        w.writerow(_row(r, 17, with_eps))
    return buf.getvalue()


def records_to_markdown(records: list[ConvergenceRecord], with_eps: bool = False) -> str:
    header = list(CSV_HEADER)
    if with_eps:
        header.insert(4, "eps")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for r in records:
        lines.append("| " + " | ".join(_row(r, 3, with_eps)) + " |")
    return "\n".join(lines) + "\n"


def export_error_field(u_h: FeFunction, u_I: FeFunction, path) -> np.ndarray:
    """Write ``vertex,x,y,error`` at mesh vertices; returns the error column."""
    if u_h.dofmap is not u_I.dofmap:
        raise ValueError("u_h and u_I must share one dof map")
    mesh = u_h.dofmap.mesh
    err = (u_h - u_I).vertex_values()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "x", "y", "error"])
        for i, ((x, y), e) in enumerate(zip(mesh.vertices.tolist(), err.tolist())):
            w.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{e:.17g}"])
    return err


__all__ = [
    "ConvergenceRecord", "SweepConfig", "Solution", "error_norms", "exact_volume_errors", "triple_norm", "a_norm",
    "c_seminorm", "boundary_error", "convergence_rates", "rate", "solve_problem", "run_sweep",
    "run_level", "run_eps_sweep", "records_to_csv", "records_to_markdown", "export_error_field",
    "sweep_mesh", "format_value", "REFERENCES",
]
