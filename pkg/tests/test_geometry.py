import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamshape.geometry import (
    DegenerateTriangleWarning,
    ObstacleCircle,
    element_circle_areas,
    shape_circle_area,
    triangle_circle_area,
)
from hamshape.spline_geometry import MeshGrid, ShapeParams, shape_from_params

from oracles import monte_carlo_triangle_circle

ROD = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 41, 7)


def test_radius_validation():
    with pytest.raises(ValueError):
        ObstacleCircle((0, 0), 0.0)


def test_disjoint_and_containment():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert triangle_circle_area(tri, ObstacleCircle((2.0, 2.0), 0.5)) == 0.0
    c = ObstacleCircle((0.25, 0.25), 0.1)
    np.testing.assert_allclose(triangle_circle_area(tri, c), math.pi * 0.01, rtol=1e-10)
    # triangle inside the disk
    np.testing.assert_allclose(triangle_circle_area(tri, ObstacleCircle((0.3, 0.3), 5.0)), 0.5, rtol=1e-12)


def test_half_disk():
    # the disk center on the hypotenuse-free edge: half the disk inside
    tri = np.array([[-5.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    np.testing.assert_allclose(triangle_circle_area(tri, ObstacleCircle((0.0, 0.0), 1.0)), math.pi / 2, rtol=1e-12)
    # quarter disk at a right-angle corner
    tri = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    np.testing.assert_allclose(triangle_circle_area(tri, ObstacleCircle((0.0, 0.0), 1.0)), math.pi / 4, rtol=1e-12)


def test_circular_segment():
    # chord at distance d from the center cuts a segment of known area
    r, d = 1.0, 0.4
    tri = np.array([[-10.0, d], [10.0, d], [0.0, 10.0]])
    seg = r * r * math.acos(d / r) - d * math.sqrt(r * r - d * d)
    np.testing.assert_allclose(triangle_circle_area(tri, ObstacleCircle((0.0, 0.0), r)), seg, rtol=1e-12)


def test_orientation_independent(rng):
    c = ObstacleCircle((0.4, 0.4), 0.3)
    for _ in range(20):
        tri = rng.random((3, 2))
        assert triangle_circle_area(tri, c) == pytest.approx(triangle_circle_area(tri[::-1], c), rel=1e-12, abs=1e-15)


def test_degenerate_triangle_warns():
    with pytest.warns(DegenerateTriangleWarning):
        assert triangle_circle_area(np.array([[0, 0], [1, 1], [2, 2]]), ObstacleCircle((1, 1), 1)) == 0.0


def test_tangent_edge_is_no_intersection():
    tri = np.array([[-1.0, 1.0], [1.0, 1.0], [0.0, 2.0]])
    assert triangle_circle_area(tri, ObstacleCircle((0.0, 0.0), 1.0)) == 0.0


def test_monte_carlo_sample(rng):
    for _ in range(10):
        tri = rng.random((3, 2))
        c = ObstacleCircle(tuple(rng.random(2)), 0.05 + 0.4 * rng.random())
        est, se = monte_carlo_triangle_circle(tri, np.array(c.midpoint), c.radius, 400_000, rng)
        assert abs(triangle_circle_area(tri, c) - est) <= 3 * se + 1e-12


def test_straight_rod_clears_circle():
    # circle bottom at 0.21, rod top at 0.2
    assert shape_circle_area(ROD, ObstacleCircle((0.5, 0.26), 0.05)) == 0.0


def test_circle_inside_thick_shape():
    mesh = shape_from_params(ShapeParams(np.full(5, 0.5), np.full(5, 1.0)), 41, 7)
    np.testing.assert_allclose(shape_circle_area(mesh, ObstacleCircle((0.5, 0.5), 0.05)), math.pi * 0.0025, rtol=1e-10)


def test_bound_and_partition():
    c = ObstacleCircle((0.5, 0.2), 0.08)
    per = element_circle_areas(ROD, c)
    assert np.all(per >= 0)
    assert np.all(per <= ROD.signed_areas() + 1e-15)
    # the rod covers y in [0, 0.2]: exactly half of the disk
    np.testing.assert_allclose(per.sum(), c.area / 2, rtol=1e-10)
    # fast path agrees with the generic routine
    slow = np.array([triangle_circle_area(ROD.nodes[t], c) for t in ROD.triangles])
    np.testing.assert_allclose(per, slow, rtol=1e-12, atol=1e-18)


def test_partition_refinement():
    # the same region meshed coarser and finer gives the same area
    c = ObstacleCircle((0.37, 0.13), 0.09)
    coarse = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 11, 3)
    fine = shape_from_params(ShapeParams(np.full(5, 0.1), np.full(5, 0.2)), 81, 9)
    np.testing.assert_allclose(shape_circle_area(coarse, c), shape_circle_area(fine, c), rtol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.3, 1.3), st.floats(-0.3, 0.5), st.floats(0.01, 0.3), st.floats(-1, 1), st.floats(-1, 1))
def test_translation_invariance_and_monotone(cx, cy, r, dx, dy):
    c = ObstacleCircle((cx, cy), r)
    a = shape_circle_area(ROD, c)
    moved = MeshGrid(ROD.nodes + [dx, dy], ROD.triangles, ROD.n_x, ROD.n_y, ROD.boundary_edges, ROD.boundary_tags)
    assert shape_circle_area(moved, ObstacleCircle((cx + dx, cy + dy), r)) == pytest.approx(a, abs=1e-12)
    assert shape_circle_area(ROD, ObstacleCircle((cx, cy), 1.1 * r)) >= a - 1e-15
    assert a <= min(0.2, c.area) + 1e-15


def test_against_fine_polygon_reference(rng):
    shapely = pytest.importorskip("shapely.geometry")
    for _ in range(50):
        tri = rng.random((3, 2))
        c = ObstacleCircle(tuple(rng.random(2)), 0.05 + 0.45 * rng.random())
        ref = shapely.Polygon(tri).intersection(shapely.Point(c.midpoint).buffer(c.radius, 2**14)).area
        # polygonal disk error ~ r^2 (2 pi)^3 / (6 n^2) with n = 2**16 segments
        assert triangle_circle_area(tri, c) == pytest.approx(ref, rel=1e-7, abs=1e-12)
