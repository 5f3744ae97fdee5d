import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curvefem.analysis import exact_volume_errors
from curvefem.femcore import (BOUNDARY_VERTEX, GAMMA_EDGE, INTERIOR, CellGeometry, FeFunction,
                              build_dofmap, evaluate, export_csv, interpolate, locate,
                              point_values, reference_basis)
from curvefem.geometry import ManufacturedSolution
from curvefem.mesh import annulus_mesh_for, build_square_mesh, disc_mesh_for
from curvefem.methods import Assembler

DEGREES = [1, 2, 3, 4, 5]


@pytest.mark.parametrize("k", DEGREES)
def test_kronecker(k):
    b = reference_basis(k)
    assert b.n == (k + 1) * (k + 2) // 2
    assert np.abs(b.values(b.ref_nodes) - np.eye(b.n)).max() < 1e-12


@settings(max_examples=20, deadline=None)
@given(k=st.sampled_from(DEGREES), seed=st.integers(0, 2 ** 31))
def test_partition_of_unity(k, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(3), 20)[:, 1:]
    b = reference_basis(k)
    assert np.abs(b.values(p).sum(axis=1) - 1).max() < 1e-12
    assert np.abs(b.gradients(p).sum(axis=1)).max() < 1e-10


def test_linear_basis_is_barycentric(rng):
    p = rng.dirichlet(np.ones(3), 10)
    assert np.allclose(reference_basis(1).values(p[:, 1:]), p)


def test_quadratic_nodes():
    nodes = reference_basis(2).ref_nodes
    expected = {(0, 0), (1, 0), (0, 1), (0.5, 0), (0.5, 0.5), (0, 0.5)}
    assert {tuple(np.round(p, 12)) for p in nodes} == expected


def test_degree_range():
    with pytest.raises(ValueError):
        reference_basis(0)
    with pytest.raises(ValueError):
        reference_basis(6)


def test_boundary_vertex_dofs(disc):
    dm = build_dofmap(disc_mesh_for(16), 1, disc)
    assert len(dm.dofs_of_class(BOUNDARY_VERTEX)) == 80


def test_quadratic_edge_dofs(disc):
    m = disc_mesh_for(16)
    dm = build_dofmap(m, 2, disc)
    gamma = dm.dofs_of_class(GAMMA_EDGE)
    assert len(gamma) == m.n_boundary_edges
    mid = m.vertices[m.boundary_edges].mean(axis=1)
    assert np.allclose(np.sort(dm.coordinates[gamma], axis=0), np.sort(mid, axis=0))


@pytest.mark.parametrize("k", DEGREES)
def test_dof_count_and_sharing(k):
    m = annulus_mesh_for(4)
    dm = build_dofmap(m, k)
    n_edges = len(m.edges)
    assert dm.n_dofs == m.n_vertices + (k - 1) * n_edges + (k - 1) * (k - 2) // 2 * m.n_triangles
    assert np.array_equal(np.unique(dm.cell_dofs), np.arange(dm.n_dofs))
    # both neighbours of a shared node agree on its position
    x = CellGeometry.of(m).to_physical(dm.basis.ref_nodes)
    assert np.abs(dm.coordinates[dm.cell_dofs] - x).max() < 1e-14
    # Euler: V - E + T = 1 for the disc-like annulus is 0
    assert m.n_vertices - n_edges + m.n_triangles == 0


def test_dof_classes_partition(disc):
    dm = build_dofmap(disc_mesh_for(8), 3, disc)
    assert len(dm.dofs_of_class(INTERIOR)) + len(dm.boundary_dofs) == dm.n_dofs


@pytest.mark.parametrize("k", DEGREES)
def test_polynomial_reproduction(k, rng):
    c = rng.normal(size=(k + 1, k + 1))

    def p(x):
        return sum(c[i, j] * x[:, 0] ** i * x[:, 1] ** j for i in range(k + 1) for j in range(k + 1 - i))

    def dp(x):
        gx = sum(i * c[i, j] * x[:, 0] ** max(i - 1, 0) * x[:, 1] ** j
                 for i in range(k + 1) for j in range(k + 1 - i))
        gy = sum(j * c[i, j] * x[:, 0] ** i * x[:, 1] ** max(j - 1, 0)
                 for i in range(k + 1) for j in range(k + 1 - i))
        return np.column_stack([gx, gy])

    sol = ManufacturedSolution(p, dp, None, None)
    u = interpolate(p, build_dofmap(disc_mesh_for(4), k))
    assert exact_volume_errors(u, sol)[1] < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_interpolation_rate(k, disc):
    errs, hs = [], []
    for M in (8, 16, 32):
        m = disc_mesh_for(M)
        errs.append(exact_volume_errors(interpolate(disc.solution.u, build_dofmap(m, k)), disc.solution)[1])
        hs.append(m.hmax)
    rates = [np.log(errs[i] / errs[i + 1]) / np.log(hs[i] / hs[i + 1]) for i in range(2)]
    assert all(abs(r - k) <= 0.3 for r in rates)
    if k == 2:
        assert all(1.8 <= r <= 2.2 for r in rates)


def test_constant_interpolant():
    u = interpolate(lambda x: np.full(len(x), 2.5), build_dofmap(disc_mesh_for(4), 3))
    assert np.all(u.coefficients == 2.5)


def test_evaluate_linear_gradient():
    m = disc_mesh_for(4)
    u = interpolate(lambda x: x[:, 0], build_dofmap(m, 2))
    for t in (0, 7, m.n_triangles - 1):
        _, g = evaluate(u, t, [0.2, 0.3, 0.5])
        assert np.allclose(g, [1, 0], atol=1e-12)


def test_evaluate_at_node():
    dm = build_dofmap(disc_mesh_for(4), 3)
    u = FeFunction(dm, np.random.default_rng(0).normal(size=dm.n_dofs))
    lat = dm.basis.lattice
    for i in range(dm.basis.n):
        v, _ = u.evaluate(5, lat[i] / 3)
        assert v == pytest.approx(u.coefficients[dm.cell_dofs[5, i]], abs=1e-12)


@pytest.mark.parametrize("k", [2, 3])
def test_gradient_of_r2(k):
    m = disc_mesh_for(8)
    u = interpolate(lambda x: x[:, 0] ** 2 + x[:, 1] ** 2, build_dofmap(m, k))
    tri, bary = locate(m, [[0.3, 0.4]])
    assert bary.min() >= -1e-12
    _, g = evaluate(u, int(tri[0]), bary[0])
    assert np.allclose(g, [0.6, 0.8], atol=1e-10)


def test_evaluate_range():
    u = interpolate(lambda x: x[:, 0], build_dofmap(build_square_mesh(2), 1))
    with pytest.raises(IndexError):
        evaluate(u, 8, [1 / 3, 1 / 3, 1 / 3])


def test_coefficient_length_checked():
    with pytest.raises(ValueError):
        FeFunction(build_dofmap(build_square_mesh(2), 1), np.zeros(3))


@pytest.mark.parametrize("k", DEGREES)
def test_mass_row_sums(k):
    asm = Assembler(build_dofmap(disc_mesh_for(4), k))
    integrals = asm.load(lambda x: np.ones(len(x)))
    assert np.abs(asm.mass() @ np.ones(asm.n) - integrals).max() < 1e-10


def test_point_values_reproduce_polynomial(rng):
    m = disc_mesh_for(8)
    u = interpolate(lambda x: x[:, 0] ** 3 - x[:, 0] * x[:, 1], build_dofmap(m, 3))
    r, t = np.sqrt(rng.uniform(0, 0.9, 50)), rng.uniform(0, 2 * np.pi, 50)
    x = np.column_stack([r * np.cos(t), r * np.sin(t)])
    assert np.allclose(point_values(u, x), x[:, 0] ** 3 - x[:, 0] * x[:, 1], atol=1e-12)


def test_export_csv(tmp_path):
    u = interpolate(lambda x: x[:, 1], build_dofmap(build_square_mesh(2), 2))
    p = tmp_path / "u.csv"
    export_csv(u, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "dof_index,x,y,value"
    assert len(lines) == u.dofmap.n_dofs + 1
    rows = np.loadtxt(p, delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 3], rows[:, 2])
