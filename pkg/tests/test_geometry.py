import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vlcsteer.geometry import (AngleGrid, convex_hull, hull_angular_distance, link_geometry, make_grid,
                               orientation_from_angles, reduced_grid, search_space)
from vlcsteer.steering import build_gain_table, solve_enumeration

from conftest import AP, USER_Z, drop

angles = st.floats(min_value=-720, max_value=720, allow_nan=False)
coords = st.floats(min_value=0, max_value=8, allow_nan=False)


def test_orientation_reference_value():
    # cos/sin of 340 and 90 degrees evaluated by hand
    np.testing.assert_allclose(orientation_from_angles(340, 90), [0.0, 0.9396926207859084, -0.3420201433256686],
                               atol=1e-12)


def test_straight_down_ignores_azimuth():
    for beta in (0, 37, 180, 359):
        np.testing.assert_allclose(orientation_from_angles(270, beta), [0, 0, -1], atol=1e-12)


@given(angles, angles)
def test_orientation_unit_norm(a, b):
    assert abs(np.linalg.norm(orientation_from_angles(a, b)) - 1) < 1e-12


def test_orientation_vectorised_shape():
    out = orientation_from_angles(np.zeros((4, 5)), np.zeros((4, 5)))
    assert out.shape == (4, 5, 3)


def test_link_geometry_below_ap():
    cos_phi, cos_theta, d = link_geometry(AP, [0, 0, -1], [4, 4, USER_Z], [0, 0, 1])
    assert (cos_phi, cos_theta) == pytest.approx((1.0, 1.0))
    assert d == pytest.approx(3.15)


def test_link_geometry_coincident_rejected():
    with pytest.raises(ValueError):
        link_geometry(AP, [0, 0, -1], AP, [0, 0, 1])


def test_link_geometry_behind_transmitter_is_negative():
    cos_phi, _, _ = link_geometry(AP, [0, 0, 1], [4, 4, USER_Z], [0, 0, 1])
    assert cos_phi < 0


class TestConvexHull:
    def test_square_with_interior_point(self):
        h = convex_hull([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]])
        assert h.kind == "polygon"
        assert len(h.vertices) == 4

    def test_collinear_collapses_to_segment(self):
        h = convex_hull([[0, 0], [1, 1], [2, 2], [0.5, 0.5]])
        assert h.kind == "segment"
        assert {tuple(v) for v in h.vertices} == {(0.0, 0.0), (2.0, 2.0)}

    def test_duplicates_collapse_to_point(self):
        assert convex_hull([[3, 3], [3, 3]]).kind == "point"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            convex_hull(np.zeros((0, 2)))

    @pytest.mark.parametrize("pts", [
        [(0.0, 0.0), (0.0, 1.0), (0.0, 2.2e-102), (1.0, 1.0)],
        [(0.0, 0.0), (0.0, 1.0), (1.0, 2.2e-102), (2.0, 0.0)],
    ])
    def test_near_degenerate_rays(self, pts):
        h = convex_hull(pts)
        assert h.kind == "polygon"
        assert h.contains(pts, tol=1e-7).all()

    @given(st.lists(st.tuples(coords, coords), min_size=3, max_size=12))
    def test_contains_inputs_and_is_ccw(self, pts):
        pts = np.array(pts)
        h = convex_hull(pts)
        assert h.contains(pts, tol=1e-7).all()
        if h.kind == "polygon":
            v = h.vertices
            x, y = v[:, 0], v[:, 1]
            assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


class TestGrid:
    def test_default_dimensions(self, grid):
        assert grid.shape == (71, 180, 15)
        assert grid.size == 71 * 180 * 15

    def test_cell_roundtrip(self, grid):
        idx = grid.index(10, 45, 4)
        assert grid.cell(idx) == (220.0, 90.0, 5.0)

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            make_grid(delta=0)

    def test_reduced_grid_single_user_below_ap(self, grid):
        hull = convex_hull([[4, 4]])
        red = reduced_grid(hull, AP, USER_Z, grid)
        assert red.mask[list(grid.alphas).index(270.0)].all()
        assert red.mask_ratio < 0.05

    def test_plane_above_ap_rejected(self, grid):
        with pytest.raises(ValueError):
            reduced_grid(convex_hull([[1, 1]]), AP, 5.0, grid)

    def test_angular_distance_zero_inside_polygon(self):
        hull = convex_hull([[2, 2], [6, 2], [6, 6], [2, 6]])
        u = orientation_from_angles(np.array([270.0]), np.array([0.0]))
        assert hull_angular_distance(hull, AP, USER_Z, u)[0] == 0.0

    def test_search_space_full_when_heights_differ(self, grid):
        pos = np.array([[1, 1, 0.85], [5, 5, 1.5]])
        assert search_space(pos, AP, grid).mask.all()


def test_enumerated_optimum_near_hull_and_reduction_exact(grid, noise):
    """The best grid cell aims at the users' hull and survives the reduction."""
    rng = np.random.default_rng(11)
    for k in (2, 3):
        for _ in range(5):
            pos = drop(rng, k)
            table = build_gain_table(pos, AP, grid)
            full = solve_enumeration(table, 1.0, noise)
            space = search_space(pos, AP, grid)
            red = solve_enumeration(table, 1.0, noise, allowed=space.cell_mask())
            assert red.objective == full.objective
            hull = convex_hull(pos[:, :2])
            u = orientation_from_angles(full.angles.alpha, full.angles.beta)[None, :]
            assert math.degrees(hull_angular_distance(hull, AP, USER_Z, u)[0]) <= grid.delta
