import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gpsspoof.geo import LocalPos
from gpsspoof.world import (
    Action,
    Circle,
    Environment,
    UavState,
    check_collision,
    ray_depth,
    ray_offsets,
    step_kinematics,
)

TARGET = LocalPos(0.0, 150.0)


def env_with(*circles):
    return Environment(tuple(circles), TARGET)


def test_zero_speed_holds_position():
    s = UavState(LocalPos(3.0, -2.0), 0.4)
    nxt = step_kinematics(s, Action(0.0, 1.0), 0.1)
    assert nxt.pos == s.pos
    assert nxt.yaw == pytest.approx(0.5)


def test_straight_step():
    nxt = step_kinematics(UavState(LocalPos(0.0, 0.0), 0.0), Action(5.0, 0.0), 0.1)
    assert nxt.pos.x_east_m == pytest.approx(0.5) and nxt.pos.y_north_m == 0.0
    assert nxt.speed == 5.0


def test_ten_steps_sum_to_five_metres():
    s = UavState(LocalPos(0.0, 0.0), 0.0)
    for _ in range(10):
        s = step_kinematics(s, Action(5.0, 0.0), 0.1)
    assert s.pos.x_east_m == pytest.approx(5.0, abs=1e-12)


def test_heading_updates_before_position():
    nxt = step_kinematics(UavState(LocalPos(0.0, 0.0), 0.0), Action(5.0, 1.0), 0.1)
    assert nxt.pos.x_east_m == pytest.approx(0.5 * math.cos(0.1))
    assert nxt.pos.y_north_m == pytest.approx(0.5 * math.sin(0.1))


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        step_kinematics(UavState(LocalPos(0.0, 0.0)), Action(1.0, 0.0), 0.0)


@given(st.floats(-10, 10), st.floats(-3, 3), st.floats(-5, 15))
def test_kinematics_wraps_yaw_and_clamps(yaw, w, v):
    s = UavState(LocalPos(0.0, 0.0), yaw)
    a = Action(v, w * 5)
    nxt = step_kinematics(s, a, 0.1)
    assert -math.pi < nxt.yaw <= math.pi
    assert 0.0 <= a.speed_cmd <= a.v_max and abs(a.yaw_rate_cmd) <= a.omega_max
    assert step_kinematics(s, a, 0.1) == nxt


def test_action_normalisation_round_trip():
    a = Action.from_normalized([0.0, -0.5])
    assert a.speed_cmd == pytest.approx(2.5) and a.yaw_rate_cmd == pytest.approx(-0.5)
    assert np.allclose(a.normalized(), [0.0, -0.5])
    assert Action.from_normalized([-1.0, 1.0]).speed_cmd == 0.0


def test_empty_environment_depth_is_clear():
    d = ray_depth(UavState(LocalPos(0.0, 0.0), 1.0), env_with())
    assert np.all(d.ranges == 1.0) and len(d.ranges) == 16


def test_centre_ray_distance_analytic():
    # odd ray count puts one ray exactly on the nose; surface is 10 - 2 = 8 m away
    d = ray_depth(UavState(LocalPos(0.0, 0.0), math.pi / 2), env_with(Circle(LocalPos(0.0, 10.0), 2.0)),
                  n_rays=17, max_range=20.0)
    assert d.ranges[8] == pytest.approx(8.0 / 20.0, abs=1e-12)


def test_off_axis_ray_analytic():
    # ray at bearing b hits circle (0,10) r 2 at t = 10 sin... solved via the quadratic
    n, fov = 5, math.pi / 2
    s = UavState(LocalPos(0.0, 0.0), math.pi / 2)
    d = ray_depth(s, env_with(Circle(LocalPos(0.0, 10.0), 2.0)), n_rays=n, fov=fov)
    for i, off in enumerate(ray_offsets(n, fov)):
        u = np.array([math.cos(s.yaw + off), math.sin(s.yaw + off)])
        b = u @ np.array([0.0, 10.0])
        disc = b * b - (100.0 - 4.0)
        want = (b - math.sqrt(disc)) / 20.0 if disc >= 0 and b > 0 else 1.0
        assert d.ranges[i] == pytest.approx(min(want, 1.0), abs=1e-12)


def test_obstacle_behind_is_invisible():
    d = ray_depth(UavState(LocalPos(0.0, 0.0), math.pi / 2), env_with(Circle(LocalPos(0.0, -10.0), 2.0)))
    assert np.all(d.ranges == 1.0)


def test_ray_order_rightmost_first():
    offs = ray_offsets(16, math.pi / 2)
    assert offs[0] == pytest.approx(-math.pi / 4) and offs[-1] == pytest.approx(math.pi / 4)
    assert np.all(np.diff(offs) > 0)


def test_inside_obstacle_reads_zero():
    d = ray_depth(UavState(LocalPos(0.0, 100.0), 0.0), env_with(Circle(LocalPos(0.0, 100.0), 5.0)))
    assert np.all(d.ranges == 0.0)


@given(st.floats(-15, 15), st.floats(2, 25), st.floats(0.5, 6), st.floats(0.1, 1.0), st.floats(-math.pi, math.pi))
def test_shrinking_never_shortens_rays(cx, cy, r, frac, yaw):
    s = UavState(LocalPos(0.0, 0.0), yaw)
    big = ray_depth(s, env_with(Circle(LocalPos(cx, cy), r))).ranges
    small = ray_depth(s, env_with(Circle(LocalPos(cx, cy), r * frac))).ranges
    assert np.all(small >= big - 1e-12)
    assert np.all((big >= 0) & (big <= 1))


def test_collision_examples():
    e = env_with(Circle(LocalPos(0.0, 100.0), 5.0))
    at_centre = check_collision(UavState(LocalPos(0.0, 100.0)), e)
    assert at_centre.collided and at_centre.min_dist == -5.0
    far = check_collision(UavState(LocalPos(0.0, 0.0)), e)
    assert not far.collided and far.min_dist == 95.0
    empty = check_collision(UavState(LocalPos(0.0, 0.0)), env_with())
    assert not empty.collided and empty.min_dist == math.inf


def test_collision_boundary_inclusive():
    e = env_with(Circle(LocalPos(0.0, 100.0), 5.0))
    assert check_collision(UavState(LocalPos(0.0, 94.0)), e).collided
    assert not check_collision(UavState(LocalPos(0.0, 93.9)), e).collided


def test_min_dist_decreases_along_approach():
    e = env_with(Circle(LocalPos(0.0, 100.0), 5.0))
    d = [check_collision(UavState(LocalPos(0.0, y)), e).min_dist for y in np.linspace(0, 90, 50)]
    assert np.all(np.diff(d) < 0)


@pytest.mark.parametrize("kw", [dict(obstacles=(Circle(LocalPos(0.0, 150.0), 5.0),), target=TARGET),
                                dict(obstacles=(), target=LocalPos(0.0, 1000.0))])
def test_environment_invariants(kw):
    with pytest.raises(ValueError):
        Environment(**kw)


def test_bad_circle_and_speed():
    with pytest.raises(ValueError):
        Circle(LocalPos(0.0, 0.0), 0.0)
    with pytest.raises(ValueError):
        UavState(LocalPos(0.0, 0.0), 0.0, -1.0)
