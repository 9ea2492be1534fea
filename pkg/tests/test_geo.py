import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpsspoof.geo import (
    FlatEarthFrame,
    GeoCoord,
    LocalPos,
    bearing,
    geodetic_to_local,
    local_to_geodetic,
    wrap_angle,
    wrap_angle_array,
)

F = FlatEarthFrame()
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_origin_maps_to_zero():
    assert geodetic_to_local(F.origin, F) == LocalPos(0.0, 0.0)
    assert local_to_geodetic(LocalPos(0.0, 0.0), F) == F.origin


def test_hundred_thousandth_degree_is_111_cm():
    c = GeoCoord(F.origin.lat_deg + 0.00001, F.origin.lon_deg)
    assert geodetic_to_local(c, F).y_north_m == pytest.approx(1.11, abs=1e-6)


def test_drift_magnitude_conversion():
    c = GeoCoord(F.origin.lat_deg + 0.00035, F.origin.lon_deg)
    assert geodetic_to_local(c, F).y_north_m == pytest.approx(38.85, abs=1e-6)


def test_inverse_of_111_cm():
    g = local_to_geodetic(LocalPos(0.0, 1.11), F)
    assert g.lat_deg - F.origin.lat_deg == pytest.approx(0.00001, abs=1e-12)
    assert g.lon_deg == F.origin.lon_deg


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_round_trip_within_a_degree(dlat, dlon):
    c = GeoCoord(F.origin.lat_deg + dlat, F.origin.lon_deg + dlon)
    p = geodetic_to_local(c, F)
    back = geodetic_to_local(local_to_geodetic(p, F), F)
    assert abs(back.x_east_m - p.x_east_m) < 1e-9
    assert abs(back.y_north_m - p.y_north_m) < 1e-9


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_linear_in_offsets(a, b, c, d):
    def loc(dlat, dlon):
        return geodetic_to_local(GeoCoord(F.origin.lat_deg + dlat, F.origin.lon_deg + dlon), F).as_array()
    lhs = loc(a + c, b + d)
    rhs = loc(a, b) + loc(c, d)  # origin maps to zero, so additivity holds up to rounding
    assert np.allclose(lhs, rhs, atol=1e-6)


def test_scale_is_configurable():
    f = FlatEarthFrame(meters_per_degree=100_000.0)
    c = GeoCoord(f.origin.lat_deg, f.origin.lon_deg + 0.001)
    assert geodetic_to_local(c, f).x_east_m == pytest.approx(100.0)


@pytest.mark.parametrize("bad", [dict(lat_deg=91.0, lon_deg=0.0), dict(lat_deg=0.0, lon_deg=-180.0),
                                 dict(lat_deg=float("nan"), lon_deg=0.0)])
def test_geocoord_invariants(bad):
    with pytest.raises(ValueError):
        GeoCoord(**bad)


def test_bad_frame_scale():
    with pytest.raises(ValueError):
        FlatEarthFrame(meters_per_degree=0.0)


@pytest.mark.parametrize("a,expected", [(0.0, 0.0), (1.5 * math.pi, -0.5 * math.pi), (-7 * math.pi, math.pi),
                                        (math.pi, math.pi), (-math.pi, math.pi)])
def test_wrap_examples(a, expected):
    assert wrap_angle(a) == pytest.approx(expected, abs=1e-12)


def test_wrap_minus_seven_pi_by_repeated_subtraction():
    a = -7 * math.pi
    while a <= -math.pi:
        a += 2 * math.pi
    assert wrap_angle(-7 * math.pi) == pytest.approx(a, abs=1e-12)


@given(finite)
def test_wrap_range_congruence_idempotence(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    k = (a - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-6
    assert wrap_angle(w) == w


@given(st.lists(finite, min_size=1, max_size=20))
def test_array_wrap_matches_scalar(xs):
    got = wrap_angle_array(np.array(xs))
    want = np.array([wrap_angle(x) for x in xs])
    assert np.allclose(np.cos(got), np.cos(want)) and np.allclose(np.sin(got), np.sin(want))
    assert np.all(got > -math.pi) and np.all(got <= math.pi)


def test_bearing_is_ccw_from_east():
    o = LocalPos(0.0, 0.0)
    assert bearing(o, LocalPos(1.0, 0.0)) == 0.0
    assert bearing(o, LocalPos(0.0, 1.0)) == pytest.approx(math.pi / 2)


def test_localpos_algebra():
    a, b = LocalPos(1.0, 2.0), LocalPos(-3.0, 0.5)
    assert a + b - b == a
    assert LocalPos(3.0, 4.0).norm() == 5.0
    assert LocalPos.from_array(a.as_array()) == a
    with pytest.raises(ValueError):
        LocalPos(float("inf"), 0.0)
