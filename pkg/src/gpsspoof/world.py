"""Ground truth for a single UAV flying at fixed altitude among circular obstacles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geo import LocalPos, wrap_angle

V_MAX = 5.0
OMEGA_MAX = 1.0
DT = 0.1


@dataclass(frozen=True)
class Circle:
    center: LocalPos
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")


@dataclass(frozen=True)
class Bounds:
    x_min: float = -200.0
    x_max: float = 200.0
    y_min: float = -200.0
    y_max: float = 300.0

    def contains(self, p: LocalPos) -> bool:
        return self.x_min <= p.x_east_m <= self.x_max and self.y_min <= p.y_north_m <= self.y_max


@dataclass(frozen=True)
class Environment:
    obstacles: tuple[Circle, ...]
    target: LocalPos
    start: LocalPos = LocalPos(0.0, 0.0)
    collision_radius: float = 1.0
    bounds: Bounds = field(default_factory=Bounds)
    goal_radius: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not self.bounds.contains(self.target) or not self.bounds.contains(self.start):
            raise ValueError("start and target must lie inside bounds")
        for c in self.obstacles:
            if (self.target - c.center).norm() < c.radius:
                raise ValueError("target lies inside an obstacle")


@dataclass(frozen=True)
class UavState:
    pos: LocalPos
    yaw: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")

    def velocity(self) -> np.ndarray:
        return self.speed * np.array([math.cos(self.yaw), math.sin(self.yaw)])


@dataclass(frozen=True)
class Action:
    """Speed and yaw-rate command; constructing one clamps it into bounds."""

    speed_cmd: float
    yaw_rate_cmd: float
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX

    def __post_init__(self):
        object.__setattr__(self, "speed_cmd", float(np.clip(self.speed_cmd, 0.0, self.v_max)))
        object.__setattr__(
            self, "yaw_rate_cmd", float(np.clip(self.yaw_rate_cmd, -self.omega_max, self.omega_max))
        )

    @classmethod
    def from_normalized(cls, a, v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> "Action":
        """Map a [-1, 1]^2 network output to physical commands."""
        a0, a1 = float(np.clip(a[0], -1, 1)), float(np.clip(a[1], -1, 1))
        return cls(0.5 * (a0 + 1.0) * v_max, a1 * omega_max, v_max, omega_max)

    def normalized(self) -> np.ndarray:
        return np.array([2.0 * self.speed_cmd / self.v_max - 1.0, self.yaw_rate_cmd / self.omega_max])


@dataclass(frozen=True)
class DepthScan:
    ranges: np.ndarray
    fov: float
    max_range: float

    def ray_bearings(self) -> np.ndarray:
        return ray_offsets(len(self.ranges), self.fov)


class CollisionCheck(NamedTuple):
    collided: bool
    min_dist: float


def step_kinematics(s: UavState, a: Action, dt: float = DT) -> UavState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    yaw = wrap_angle(s.yaw + a.yaw_rate_cmd * dt)
    step = a.speed_cmd * dt
    pos = LocalPos(s.pos.x_east_m + step * math.cos(yaw), s.pos.y_north_m + step * math.sin(yaw))
    return UavState(pos, yaw, a.speed_cmd)


def ray_offsets(n_rays: int, fov: float) -> np.ndarray:
    """Bearing of each ray relative to the nose, right-most ray first."""
    if n_rays == 1:
        return np.zeros(1)
    return fov * (np.arange(n_rays) / (n_rays - 1) - 0.5)


def _ray_circle_hits(origin: np.ndarray, dirs: np.ndarray, circles, max_range: float) -> np.ndarray:
    # dirs: (n, 2) unit vectors; returns first hit distance per ray, max_range if none
    best = np.full(len(dirs), max_range)
    for c in circles:
        oc = origin - c.center.as_array()
        b = dirs @ oc
        cc = oc @ oc - c.radius**2
        disc = b * b - cc
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        # inside the circle: the ray starts in the obstacle
        t = np.where(cc <= 0, 0.0, np.where(t_near >= 0, t_near, np.where(t_far >= 0, 0.0, np.inf)))
        t = np.where(ok, t, np.inf)
        best = np.minimum(best, t)
    return best


def ray_depth(
    s: UavState, env: Environment, n_rays: int = 16, fov: float = math.pi / 2, max_range: float = 20.0
) -> DepthScan:
    if n_rays < 1 or not max_range > 0:
        raise ValueError("need n_rays >= 1 and max_range > 0")
    ang = s.yaw + ray_offsets(n_rays, fov)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    hits = _ray_circle_hits(s.pos.as_array(), dirs, env.obstacles, max_range)
    return DepthScan(np.minimum(hits, max_range) / max_range, fov, max_range)


def check_collision(s: UavState, env: Environment) -> CollisionCheck:
    if not env.obstacles:
        return CollisionCheck(False, math.inf)
    min_dist = min((s.pos - c.center).norm() - c.radius for c in env.obstacles)
    return CollisionCheck(min_dist <= env.collision_radius, min_dist)
