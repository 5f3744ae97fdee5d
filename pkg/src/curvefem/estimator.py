"""scikit-learn style wrapper around one discrete solve.

``fit`` takes a mesh (or the integer ``M`` of the default mesh family) and
solves the model problem; ``predict`` evaluates the discrete solution at
points.  The wrapper holds no state beyond the last fit.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import error_norms, solve_problem, sweep_mesh
from .femcore import point_values
from .geometry import make_geometry
from .mesh import Mesh
from .methods import MethodConfig


class CurvedDomainPoisson(RegressorMixin, BaseEstimator):
    """Poisson solve on a polygonal approximation of a disc or annulus.

    Parameters mirror ``MethodConfig`` plus the domain description.  After
    ``fit`` the attributes ``mesh_``, ``solution_`` (an ``FeFunction``),
    ``errors_`` (L2, H1, boundary) and ``solver_info_`` are available.
    """

    def __init__(self, method="robin", k=2, gamma=100.0, epsilon=1e-13, f_extension="analytic",
                 domain="disc", radius=1.0, inner_radius=0.5, solver="auto", reference="exact"):
        self.method = method
        self.k = k
        self.gamma = gamma
        self.epsilon = epsilon
        self.f_extension = f_extension
        self.domain = domain
        self.radius = radius
        self.inner_radius = inner_radius
        self.solver = solver
        self.reference = reference

    def fit(self, X, y=None):
        """Solve on ``X``: a ``Mesh`` or the mesh-size integer ``M``.  ``y`` is ignored."""
        if isinstance(X, Mesh):
            mesh = X
        elif isinstance(X, (int, np.integer)) and X >= 1:
            mesh = sweep_mesh(self.domain, int(X), self.radius, self.inner_radius)
        else:
            raise TypeError(f"fit expects a Mesh or a positive integer M, got {type(X).__name__}")
        config = MethodConfig(self.method, self.k, self.gamma, self.epsilon, self.f_extension)
        geometry = make_geometry(self.domain, self.radius, self.inner_radius)
        sol = solve_problem(mesh, geometry, config, self.solver)
        self.mesh_ = mesh
        self.geometry_ = geometry
        self.solution_ = sol.u_h
        self.solver_info_ = sol.info
        self.errors_ = error_norms(sol.u_h, sol.u_I, geometry, sol.assembler, self.reference)
        return self

    def predict(self, X):
        """Discrete solution at the points ``X`` of shape (n, 2)."""
        check_is_fitted(self, "solution_")
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
        return point_values(self.solution_, X)

    def score(self, X, y=None, sample_weight=None):
        """R^2 of ``predict(X)`` against ``y``, or against the exact solution when ``y`` is None."""
        if y is None:
            check_is_fitted(self, "solution_")
            y = self.geometry_.solution.u(check_array(X))
        return super().score(X, y, sample_weight)
