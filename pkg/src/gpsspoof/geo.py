"""Flat-earth geodetic conversion into a planar local frame, plus angle helpers.

Yaw is measured counterclockwise from +x (east), in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_METERS_PER_DEGREE = 111_000.0


@dataclass(frozen=True)
class GeoCoord:
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lat_deg, self.lon_deg, self.alt_m)):
            raise ValueError(f"non-finite coordinate {self}")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 < self.lon_deg <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


@dataclass(frozen=True)
class LocalPos:
    x_east_m: float
    y_north_m: float

    def __post_init__(self):
        if not (math.isfinite(self.x_east_m) and math.isfinite(self.y_north_m)):
            raise ValueError(f"non-finite position {self}")

    @classmethod
    def from_array(cls, a) -> "LocalPos":
        return cls(float(a[0]), float(a[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_east_m, self.y_north_m])

    def __add__(self, other: "LocalPos") -> "LocalPos":
        return LocalPos(self.x_east_m + other.x_east_m, self.y_north_m + other.y_north_m)

    def __sub__(self, other: "LocalPos") -> "LocalPos":
        return LocalPos(self.x_east_m - other.x_east_m, self.y_north_m - other.y_north_m)

    def norm(self) -> float:
        return math.hypot(self.x_east_m, self.y_north_m)


ORIGIN = LocalPos(0.0, 0.0)


@dataclass(frozen=True)
class FlatEarthFrame:
    """Equal-scale lat/lon to east/north mapping around ``origin``."""

    origin: GeoCoord = GeoCoord(37.5894, 127.0323, 0.0)
    meters_per_degree: float = DEFAULT_METERS_PER_DEGREE

    def __post_init__(self):
        if not self.meters_per_degree > 0:
            raise ValueError("meters_per_degree must be positive")


def geodetic_to_local(c: GeoCoord, f: FlatEarthFrame) -> LocalPos:
    return LocalPos(
        (c.lon_deg - f.origin.lon_deg) * f.meters_per_degree,
        (c.lat_deg - f.origin.lat_deg) * f.meters_per_degree,
    )


def local_to_geodetic(p: LocalPos, f: FlatEarthFrame, alt_m: float | None = None) -> GeoCoord:
    return GeoCoord(
        f.origin.lat_deg + p.y_north_m / f.meters_per_degree,
        f.origin.lon_deg + p.x_east_m / f.meters_per_degree,
        f.origin.alt_m if alt_m is None else alt_m,
    )


def wrap_angle(a: float) -> float:
    """Map ``a`` onto (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def wrap_angle_array(a: np.ndarray) -> np.ndarray:
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi)
    w = np.where(w <= 0.0, w + 2.0 * np.pi, w)
    return w - np.pi


def bearing(src: LocalPos, dst: LocalPos) -> float:
    return math.atan2(dst.y_north_m - src.y_north_m, dst.x_east_m - src.x_east_m)
