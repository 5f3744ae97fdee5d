"""Finite elements on polygonal approximations of curved domains.

Plain polygonal Dirichlet, boundary-corrected Nitsche (nonsymmetric and
symmetrized) and the regularized Robin-type method, with the tooling to
measure their convergence on discs and annuli.
"""

from .analysis import (ConvergenceRecord, SweepConfig, error_norms, records_to_csv,
                       records_to_markdown, run_eps_sweep, run_sweep, solve_problem, triple_norm)
from .estimator import CurvedDomainPoisson
from .femcore import FeFunction, build_dofmap, interpolate
from .geometry import Annulus, Disc, make_geometry
from .linalg import solve
from .mesh import Mesh, annulus_mesh_for, build_annulus_mesh, build_disc_mesh, disc_mesh_for
from .methods import MethodConfig, assemble

__version__ = "0.1.0"

__all__ = [
    "Annulus", "ConvergenceRecord", "CurvedDomainPoisson", "Disc", "FeFunction", "Mesh",
    "MethodConfig", "SweepConfig", "annulus_mesh_for", "assemble", "build_annulus_mesh",
    "build_disc_mesh", "build_dofmap", "disc_mesh_for", "error_norms", "interpolate",
    "make_geometry", "records_to_csv", "records_to_markdown", "run_eps_sweep", "run_sweep",
    "solve", "solve_problem", "triple_norm",
]
