import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvefem.quadrature import edge_quadrature, triangle_quadrature


def monomial_integral(a, b):
    # integral of x^a y^b over the reference triangle
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_centroid_rule():
    r = triangle_quadrature(1)
    assert np.allclose(r.points, [[1 / 3, 1 / 3]]) and np.allclose(r.weights, [0.5])


def test_x2y():
    r = triangle_quadrature(12)
    val = np.sum(r.weights * r.points[:, 0] ** 2 * r.points[:, 1])
    assert val == pytest.approx(1 / 60, rel=1e-13)


@pytest.mark.parametrize("q", range(0, 21))
def test_weights_sum_to_area(q):
    assert np.sum(triangle_quadrature(q).weights) == pytest.approx(0.5, rel=1e-14)


@pytest.mark.parametrize("q", [1, 2, 4, 7, 12, 16])
def test_all_monomials(q):
    r = triangle_quadrature(q)
    x, y = r.points.T
    for a in range(q + 1):
        for b in range(q + 1 - a):
            assert np.sum(r.weights * x ** a * y ** b) == pytest.approx(monomial_integral(a, b), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(q=st.integers(2, 20), a=st.integers(0, 20), b=st.integers(0, 20))
def test_monomials_hypothesis(q, a, b):
    if a + b > q:
        return
    r = triangle_quadrature(q)
    x, y = r.points.T
    assert np.sum(r.weights * x ** a * y ** b) == pytest.approx(monomial_integral(a, b), rel=1e-12)


def test_unsupported_exactness():
    with pytest.raises(ValueError):
        triangle_quadrature(-1)
    with pytest.raises(ValueError):
        triangle_quadrature(1000)


def test_edge_midpoint():
    r = edge_quadrature(1)
    assert r.points[0] == pytest.approx(0.5) and r.weights[0] == pytest.approx(1.0)


def test_edge_x9():
    r = edge_quadrature(5)
    assert abs(np.sum(r.weights * r.points ** 9) - 0.1) < 1e-13


@pytest.mark.parametrize("n", range(1, 9))
def test_edge_exactness_and_interior(n):
    r = edge_quadrature(n)
    for p in range(2 * n):
        assert np.sum(r.weights * r.points ** p) == pytest.approx(1 / (p + 1), rel=1e-13)
    assert np.minimum(r.points, 1 - r.points).min() > 0


def test_edge_rejects_zero():
    with pytest.raises(ValueError):
        edge_quadrature(0)
