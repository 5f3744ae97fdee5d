import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from curvefem import CurvedDomainPoisson
from curvefem.mesh import disc_mesh_for


def test_params_round_trip():
    est = CurvedDomainPoisson(method="bdt", k=3)
    params = est.get_params()
    assert params["method"] == "bdt" and params["k"] == 3 and params["gamma"] == 100.0
    other = clone(est).set_params(k=2)
    assert other.k == 2 and est.k == 3


def test_fit_predict_disc():
    est = CurvedDomainPoisson(k=2).fit(16)
    x = np.array([[0.0, 0.0], [0.3, 0.4], [0.5, -0.5]])
    exact = 1 - (x ** 2).sum(axis=1) ** 3
    assert np.allclose(est.predict(x), exact, atol=1e-3)
    assert est.score(x) > 0.999
    l2, h1, bd = est.errors_
    assert 0 < l2 < h1


def test_fit_on_mesh_and_annulus():
    est = CurvedDomainPoisson(domain="annulus", k=2, epsilon=1e-9).fit(8)
    assert est.mesh_.n_boundary_edges == 48
    assert est.solver_info_["symmetric"]
    est2 = CurvedDomainPoisson(k=1).fit(disc_mesh_for(4))
    assert est2.mesh_.n_boundary_edges == 20


def test_predict_validation():
    with pytest.raises(NotFittedError):
        CurvedDomainPoisson().predict([[0.0, 0.0]])
    est = CurvedDomainPoisson(k=1).fit(4)
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        est.predict([[np.nan, 0.0]])


def test_fit_rejects_bad_input():
    with pytest.raises(TypeError):
        CurvedDomainPoisson().fit("sixteen")
    with pytest.raises(ValueError):
        CurvedDomainPoisson(method="galerkin").fit(4)
