import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbgtouch.geometry import (GeometryError, NormalizedPoint, SensorGeometry, SurfacePoint,
                               circular_delta, embed, grid_angle, grid_to_surface, normalize,
                               surface_distance_mm)

SMALL = SensorGeometry(radius_mm=10, height_mm=20, grid_cols=4, grid_rows=5, spacing_x_mm=2,
                       spacing_y_mm=3, rotation_increment_rad=math.pi / 6)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
height = st.floats(0.0, 1.0, allow_nan=False)
points = st.builds(NormalizedPoint, unit, height)


def test_grid_center_column_is_angle_zero():
    p = grid_to_surface(SMALL, 2, 0, 0)
    assert p.angle_rad == pytest.approx(0.0, abs=1e-15)
    assert p.height_mm == 0.0


def test_grid_rotation_adds_increment():
    p = grid_to_surface(SMALL, 2, 2, 3)
    assert p.angle_rad == pytest.approx(math.pi / 2, rel=1e-15)
    assert p.height_mm == pytest.approx(6.0)


def test_grid_off_center_column():
    # (4 - 2) / 20 * 2 = 0.2
    p = grid_to_surface(SMALL, 1, 1, 0)
    assert p.angle_rad == pytest.approx(math.asin(0.2), rel=1e-14)
    assert p.angle_rad == pytest.approx(0.20136, abs=1e-5)
    assert p.height_mm == 3.0


@pytest.mark.parametrize("i, j, k", [(-1, 0, 0), (5, 0, 0), (0, 5, 0), (0, -1, 0), (0, 0, -1)])
def test_grid_rejects_out_of_range(i, j, k):
    with pytest.raises(GeometryError):
        grid_to_surface(SMALL, i, j, k)


def test_grid_angle_domain_error():
    # a geometry that only fails past i = n: arcsin argument for i = -3 exceeds 1
    with pytest.raises(GeometryError):
        grid_angle(SensorGeometry(radius_mm=8, grid_cols=8, spacing_x_mm=2), -3)


@pytest.mark.parametrize("kw", [
    dict(radius_mm=7.9),
    dict(grid_cols=11, spacing_x_mm=2.0),
    dict(grid_rows=8, spacing_y_mm=3.0),
    dict(rotation_increment_rad=1.0),
])
def test_geometry_invariants(kw):
    with pytest.raises(GeometryError):
        SensorGeometry(**kw)


def test_default_geometry_has_twelve_rotations():
    assert SensorGeometry().rotations == 12


def test_surface_point_wraps_angle():
    assert SurfacePoint(2 * math.pi + 1.0, 0.0).angle_rad == pytest.approx(1.0)
    assert SurfacePoint(-1.0, 0.0).angle_rad == pytest.approx(2 * math.pi - 1.0)


@pytest.mark.parametrize("theta, y, u, v", [
    (0.0, 0.0, 0.0, 0.0),
    (math.pi, 20.0, 0.5, 1.0),
    (2 * math.pi + math.pi / 2, 5.0, 0.25, 0.25),
])
def test_normalize_examples(theta, y, u, v):
    p = normalize(SensorGeometry(height_mm=20), SurfacePoint(theta, y))
    assert p.u == pytest.approx(u, abs=1e-15)
    assert p.v == pytest.approx(v, abs=1e-15)


@pytest.mark.parametrize("u1, u2, d", [(0.3, 0.3, 0.0), (0.95, 0.05, -0.10), (0.0, 0.5, 0.5)])
def test_circular_delta_examples(u1, u2, d):
    assert circular_delta(u1, u2) == pytest.approx(d, abs=1e-12)


def test_circular_delta_antipodal_tie_is_positive():
    assert circular_delta(0.5, 0.0) == 0.5
    assert circular_delta(0.75, 0.25) == 0.5


def test_distance_examples():
    g = SensorGeometry(radius_mm=10, height_mm=20)
    a = NormalizedPoint(0.2, 0.3)
    assert surface_distance_mm(g, a, a) == 0.0
    assert surface_distance_mm(g, NormalizedPoint(0.1, 0.4), NormalizedPoint(0.6, 0.4)) == pytest.approx(20.0)
    d = surface_distance_mm(g, NormalizedPoint(0.0, 0.0), NormalizedPoint(0.25, 0.5))
    assert d == pytest.approx(math.sqrt(300.0), rel=1e-12)
    assert d == pytest.approx(17.3205, abs=1e-4)


@given(unit, unit)
def test_circular_delta_range_and_congruence(u1, u2):
    d = circular_delta(u1, u2)
    assert -0.5 < d <= 0.5
    assert math.isclose((u2 + d - u1 + 0.5) % 1.0, 0.5, abs_tol=1e-12)
    assert abs(d) == pytest.approx(min(abs(u1 - u2), 1 - abs(u1 - u2)), abs=1e-12)


@given(unit, unit)
def test_circular_delta_antisymmetric(u1, u2):
    d = circular_delta(u1, u2)
    if abs(abs(d) - 0.5) > 1e-9:
        assert circular_delta(u2, u1) == pytest.approx(-d, abs=1e-12)


@given(points, points)
def test_distance_matches_3d_embedding(a, b):
    g = SensorGeometry()
    direct = np.linalg.norm(embed(g, a.u, a.v) - embed(g, b.u, b.v))
    assert surface_distance_mm(g, a, b) == pytest.approx(direct, abs=1e-9)


@given(points, points, points)
def test_distance_is_a_metric(a, b, c):
    g = SensorGeometry()
    ab = surface_distance_mm(g, a, b)
    assert ab >= 0
    assert ab == pytest.approx(surface_distance_mm(g, b, a), abs=1e-12)
    assert surface_distance_mm(g, a, a) == 0.0
    assert ab <= surface_distance_mm(g, a, c) + surface_distance_mm(g, c, b) + 1e-9


@given(points, points)
def test_distance_zero_iff_equal(a, b):
    g = SensorGeometry()
    d = surface_distance_mm(g, a, b)
    same = circular_delta(a.u, b.u) == 0 and a.v == b.v
    assert (d == 0) == same or d < 1e-12


@given(points, points, unit)
def test_distance_invariant_to_common_rotation(a, b, offset):
    g = SensorGeometry()
    a2 = NormalizedPoint(a.u + offset, a.v)
    b2 = NormalizedPoint(b.u + offset, b.v)
    assert surface_distance_mm(g, a2, b2) == pytest.approx(surface_distance_mm(g, a, b), abs=1e-9)


@given(st.integers(0, 5), st.integers(0, 11))
def test_grid_symmetric_about_center_column(i, k):
    g = SensorGeometry()
    n = g.grid_cols
    shift = k * g.rotation_increment_rad
    a = float(grid_angle(g, i, k)) - shift
    b = float(grid_angle(g, n - i, k)) - shift
    assert a == pytest.approx(-b, abs=1e-14)
