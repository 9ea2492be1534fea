"""Simulated GPS stream and the attacker's injection point on it.

Log lines are ``seq,t,lat_deg,lon_deg,alt_m,h_acc`` with degrees printed to
nine decimals.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .geo import FlatEarthFrame, GeoCoord, LocalPos, geodetic_to_local, local_to_geodetic
from .world import UavState

LOG_HEADER = "seq,t,lat_deg,lon_deg,alt_m,h_acc"


@dataclass(frozen=True)
class GpsMessage:
    t: float
    coord: GeoCoord
    h_acc: float
    seq: int


@dataclass(frozen=True)
class GpsNoiseModel:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def draw(self, seq: int) -> np.ndarray:
        # keyed on (seed, seq) so any message can be regenerated independently
        if self.sigma == 0:
            return np.zeros(2)
        rng = np.random.default_rng([self.seed, seq])
        return rng.normal(0.0, self.sigma, size=2)


def sample_gps(truth: UavState, frame: FlatEarthFrame, noise: GpsNoiseModel, t: float, seq: int) -> GpsMessage:
    e = noise.draw(seq)
    p = LocalPos(truth.pos.x_east_m + e[0], truth.pos.y_north_m + e[1])
    h_acc = noise.sigma if noise.sigma > 0 else 0.0
    return GpsMessage(t, local_to_geodetic(p, frame), h_acc, seq)


def inject_spoof(msg: GpsMessage, offset: LocalPos, frame: FlatEarthFrame) -> GpsMessage:
    p = geodetic_to_local(msg.coord, frame) + offset
    return replace(msg, coord=local_to_geodetic(p, frame, msg.coord.alt_m))


def message_local(msg: GpsMessage, frame: FlatEarthFrame) -> LocalPos:
    return geodetic_to_local(msg.coord, frame)


def format_message(msg: GpsMessage) -> str:
    c = msg.coord
    return f"{msg.seq},{msg.t:.3f},{c.lat_deg:.9f},{c.lon_deg:.9f},{c.alt_m:.3f},{msg.h_acc:.3f}"


def parse_message(line: str) -> GpsMessage:
    seq, t, lat, lon, alt, h_acc = line.strip().split(",")
    return GpsMessage(float(t), GeoCoord(float(lat), float(lon), float(alt)), float(h_acc), int(seq))


def write_log(path, messages: Iterable[GpsMessage]) -> None:
    lines = [LOG_HEADER] + [format_message(m) for m in messages]
    Path(path).write_text("\n".join(lines) + "\n")


def read_log(path) -> Iterator[GpsMessage]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != LOG_HEADER:
            raise ValueError(f"unexpected GPS log header: {header!r}")
        for line in fh:
            if line.strip():
                yield parse_message(line)


def replay(messages: Iterable[GpsMessage], frame: FlatEarthFrame, ekf) -> list:
    """Feed a recorded stream through an estimator; returns the fusion outcomes."""
    out = []
    prev_t = None
    for m in messages:
        dt = ekf.cfg.dt if prev_t is None else max(m.t - prev_t, 1e-9)
        out.append(ekf.step(message_local(m, frame), dt))
        prev_t = m.t
    return out
