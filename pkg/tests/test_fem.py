import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamshape import fem
from hamshape.fem import BoundaryLoads, ConstraintError, MaterialParams
from hamshape.spline_geometry import DIRICHLET, BSplineBasis, MeshGrid, ShapeParams, shape_from_params

from oracles import p1_element_stiffness_hand

MAT = MaterialParams()
ROD = ShapeParams(np.full(5, 0.1), np.full(5, 0.2))


def rod(n_x=41, n_y=7):
    return shape_from_params(ROD, n_x, n_y)


def test_lame_constants():
    E, nu = 320e9, 0.25
    assert MAT.lame_lambda == nu * E / ((1 + nu) * (1 - 2 * nu))
    assert MAT.lame_mu == E / (2 * (1 + nu))
    np.testing.assert_allclose(MAT.lame_lambda, 128e9, rtol=1e-15)
    np.testing.assert_allclose(MAT.lame_mu, 128e9, rtol=1e-15)


@pytest.mark.parametrize("kw", [{"poisson_ratio": 0.5}, {"poisson_ratio": 0.0}, {"youngs_modulus": -1.0},
                                {"sigma0": 0.0}, {"weibull_module": 0.5}])
def test_material_validation(kw):
    with pytest.raises(ValueError):
        MaterialParams(**kw)


def test_element_matrix_single_triangle():
    xy = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = MeshGrid(xy, np.array([[0, 1, 2]]), 2, 2, np.zeros((0, 2), int), np.zeros(0, int))
    mat = MaterialParams(youngs_modulus=1.0, poisson_ratio=0.3)
    geom = fem.ElementGeometry.from_mesh(mesh)
    K = fem.element_stiffness(geom, mat)[0]
    np.testing.assert_allclose(K, p1_element_stiffness_hand(xy, mat.lame_lambda, mat.lame_mu), atol=1e-14)


def test_element_matrix_random_triangles(rng):
    mat = MaterialParams(youngs_modulus=2.5, poisson_ratio=0.21)
    for _ in range(20):
        xy = rng.random((3, 2))
        if np.linalg.det(np.column_stack([np.ones(3), xy])) < 0:
            xy = xy[[0, 2, 1]]
        mesh = MeshGrid(xy, np.array([[0, 1, 2]]), 2, 2, np.zeros((0, 2), int), np.zeros(0, int))
        K = fem.element_stiffness(fem.ElementGeometry.from_mesh(mesh), mat)[0]
        np.testing.assert_allclose(K, p1_element_stiffness_hand(xy, mat.lame_lambda, mat.lame_mu), rtol=1e-12, atol=1e-14)


def test_zero_loads():
    K, F = fem.assemble_system(rod(), MAT, BoundaryLoads((0.0, 0.0)))
    assert not F.any()
    sol = fem.solve_state(K, F, rod(), MAT)
    assert not sol.displacement.any()
    assert not sol.stress.any()


def test_symmetry_and_rigid_modes():
    mesh = shape_from_params(ShapeParams(np.array([0.1, 0.3, -0.1, 0.2, 0.1]), np.array([0.2, 0.1, 0.3, 0.15, 0.2])), 41, 7)
    K, _ = fem.assemble_system(mesh, MAT, BoundaryLoads())
    assert abs(K - K.T).max() == 0.0
    x, y = mesh.nodes.T
    scale = abs(K).max()
    for v in (np.column_stack([np.ones_like(x), 0 * x]), np.column_stack([0 * x, np.ones_like(x)]), np.column_stack([-y, x])):
        assert np.abs(K @ v.ravel()).max() <= 1e-9 * scale


def test_traction_total_force():
    F = fem.assemble_system(rod(), MAT, BoundaryLoads((1e7, 3e6)))[1].reshape(-1, 2)
    # edge length 0.2 times traction
    np.testing.assert_allclose(F.sum(axis=0), [2e6, 6e5], rtol=1e-13)


def test_patch_test_uniaxial():
    """Uniaxial traction with only the rigid modes removed: constant plane strain state."""
    mesh = rod()
    g = 1e7
    K, F = fem.assemble_system(mesh, MAT, BoundaryLoads((g, 0.0)))
    left = mesh.nodes_with_tag(DIRICHLET)
    fixed = np.concatenate([2 * left, [2 * left[0] + 1]])
    sol = fem.solve_state(K, F, mesh, MAT, fixed_dofs=np.sort(fixed))
    E, nu = MAT.youngs_modulus, MAT.poisson_ratio
    exx = g * (1 - nu**2) / E
    eyy = -g * nu * (1 + nu) / E
    np.testing.assert_allclose(sol.stress[:, 0, 0], g, rtol=1e-8)
    assert np.abs(sol.stress[:, 1, 1]).max() <= 1e-8 * g
    assert np.abs(sol.stress[:, 0, 1]).max() <= 1e-8 * g
    np.testing.assert_allclose(sol.strain[:, 0, 0], exx, rtol=1e-8)
    np.testing.assert_allclose(sol.strain[:, 1, 1], eyy, rtol=1e-8)
    np.testing.assert_allclose(sol.displacement[:, 0], exx * mesh.nodes[:, 0], rtol=1e-8, atol=1e-8 * exx)


def test_stress_symmetric_and_hooke():
    mesh = rod()
    sol = fem.solve(mesh, MAT, BoundaryLoads())
    np.testing.assert_array_equal(sol.stress[:, 0, 1], sol.stress[:, 1, 0])
    eps = sol.strain
    tr = eps[:, 0, 0] + eps[:, 1, 1]
    expected = MAT.lame_lambda * tr[:, None, None] * np.eye(2) + 2 * MAT.lame_mu * eps
    np.testing.assert_allclose(sol.stress, expected, rtol=1e-14, atol=1e-6)
    assert np.all(sol.displacement[mesh.nodes_with_tag(DIRICHLET)] == 0)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=5, max_size=5), st.lists(st.floats(0.08, 0.4), min_size=5, max_size=5))
def test_work_identity_and_linearity(ml, th):
    mesh = shape_from_params(ShapeParams(np.array(ml), np.array(th)), 21, 5)
    K, F = fem.assemble_system(mesh, MAT, BoundaryLoads())
    sol = fem.solve_state(K, F, mesh, MAT)
    u = sol.displacement.ravel()
    np.testing.assert_allclose(0.5 * u @ (K @ u), 0.5 * F @ u, rtol=1e-10)
    sol2 = fem.solve(mesh, MAT, BoundaryLoads((2e7, 0.0)))
    np.testing.assert_allclose(sol2.displacement, 2 * sol.displacement, rtol=1e-12, atol=1e-25)
    np.testing.assert_allclose(sol2.stress, 2 * sol.stress, rtol=1e-12, atol=1e-3)


def test_mesh_refinement_consistency():
    coarse = fem.solve(rod(41, 7), MAT, BoundaryLoads())
    fine_mesh = rod(81, 13)
    fine = fem.solve(fine_mesh, MAT, BoundaryLoads())
    # shared nodes: every second node in both directions
    idx = (np.arange(41)[:, None] * 2 * 13 + np.arange(7)[None, :] * 2).ravel()
    np.testing.assert_allclose(fine_mesh.nodes[idx], rod().nodes, atol=1e-15)
    diff = np.linalg.norm(fine.displacement[idx] - coarse.displacement)
    assert diff <= 1e-2 * np.linalg.norm(fine.displacement[idx])


def test_missing_dirichlet():
    mesh = rod()
    tags = np.where(mesh.boundary_tags == DIRICHLET, 2, mesh.boundary_tags)
    bad = MeshGrid(mesh.nodes, mesh.triangles, mesh.n_x, mesh.n_y, mesh.boundary_edges, tags)
    with pytest.raises(ConstraintError):
        fem.assemble_system(bad, MAT, BoundaryLoads())


def test_inverted_element_rejected():
    mesh = rod()
    nodes = mesh.nodes.copy()
    nodes[[0, 1]] = nodes[[1, 0]]
    bad = MeshGrid(nodes, mesh.triangles, mesh.n_x, mesh.n_y, mesh.boundary_edges, mesh.boundary_tags)
    with pytest.raises(ValueError):
        fem.ElementGeometry.from_mesh(bad)


def test_singular_system_reports():
    mesh = rod(3, 2)
    K, F = fem.assemble_system(mesh, MAT, BoundaryLoads())
    with pytest.raises(fem.FemSolveError, match="condition"):
        fem.solve_state(K, F, mesh, MAT, fixed_dofs=np.array([0]))
