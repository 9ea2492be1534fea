"""Navigation policy inputs and the policies that consume them (network and scripted surrogate).

The policy only ever sees the depth scan, the relative distance to the
target and the relative yaw, both computed from the *estimated* position.

Weight file layout (little-endian)::

    magic       4 bytes  b"GSNP"
    version     uint32
    header_len  uint32
    header      header_len bytes of UTF-8 JSON: depth_sizes, trunk_sizes,
                hidden_act, out_act, v_max, omega_max, d_scale
    data        float64, for each layer in order (depth branch then trunk):
                W row-major (in x out), then b (out)

A JSON sidecar ``<file>.json`` carries the same header plus free-form
metadata for humans; loading never depends on it.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geo import LocalPos, wrap_angle, wrap_angle_array
from .nets import BranchNet, DimensionMismatch
from .world import OMEGA_MAX, V_MAX, Action, DepthScan

MAGIC = b"GSNP"
FORMAT_VERSION = 1


class DegenerateRelative(ValueError):
    pass


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    pos_tar: LocalPos
    d_scale: float

    def __post_init__(self):
        if not self.d_scale > 0:
            raise ValueError("d_scale must be positive")


@dataclass(frozen=True)
class PolicyObservation:
    depth: np.ndarray
    d_rel_norm: float
    yaw_rel_norm: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.depth, [self.d_rel_norm, self.yaw_rel_norm]])

    @classmethod
    def from_array(cls, a: np.ndarray) -> "PolicyObservation":
        return cls(np.asarray(a[:-2], dtype=float), float(a[-2]), float(a[-1]))


class Relative(NamedTuple):
    d_rel: float
    yaw_rel: float


def compute_rel(pos_cur: LocalPos, yaw_cur: float, tgt: TargetSpec) -> Relative:
    dx = tgt.pos_tar.x_east_m - pos_cur.x_east_m
    dy = tgt.pos_tar.y_north_m - pos_cur.y_north_m
    if dx == 0.0 and dy == 0.0:
        raise DegenerateRelative("current position equals the target")
    return Relative(math.hypot(dx, dy), wrap_angle(math.atan2(dy, dx) - yaw_cur))


def compute_rel_batch(pos_cur: np.ndarray, yaw_cur: float, tgt: TargetSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``compute_rel`` over an ``(N, 2)`` array of candidate positions."""
    d = tgt.pos_tar.as_array() - np.atleast_2d(pos_cur)
    return np.hypot(d[:, 0], d[:, 1]), wrap_angle_array(np.arctan2(d[:, 1], d[:, 0]) - yaw_cur)


def normalize_rel(d_rel, yaw_rel, d_scale: float):
    return np.clip(np.asarray(d_rel) / d_scale, 0.0, 1.0), np.asarray(yaw_rel) / math.pi


def make_observation(depth: DepthScan | np.ndarray, rel: Relative, tgt: TargetSpec) -> PolicyObservation:
    ranges = depth.ranges if isinstance(depth, DepthScan) else np.asarray(depth)
    dn, yn = normalize_rel(rel.d_rel, rel.yaw_rel, tgt.d_scale)
    return PolicyObservation(np.asarray(ranges, dtype=float), float(dn), float(yn))


@dataclass
class MlpPolicy:
    net: BranchNet
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX

    @classmethod
    def build(cls, n_rays: int = 16, depth_hidden=(32, 16), trunk_hidden=(64, 64),
              seed: int | None = 0, v_max: float = V_MAX, omega_max: float = OMEGA_MAX) -> "MlpPolicy":
        depth_sizes = [n_rays, *depth_hidden]
        trunk_sizes = [depth_sizes[-1] + 2, *trunk_hidden, 2]
        net = BranchNet(depth_sizes, trunk_sizes, "relu", "tanh")
        if seed is not None:
            net.init(np.random.default_rng(seed))
        return cls(net, v_max, omega_max)

    def normalized_batch(self, obs: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        n = self.net.depth_sizes[0]
        if obs.shape[1] != n + 2:
            raise DimensionMismatch(f"observation has {obs.shape[1]} entries, policy expects {n + 2}")
        return self.net.forward(obs[:, :n], obs[:, n:])

    def act_batch(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        out = self.normalized_batch(obs)
        return 0.5 * (out[:, 0] + 1.0) * self.v_max, out[:, 1] * self.omega_max

    def __call__(self, obs: PolicyObservation) -> Action:
        return forward(self, obs)


def forward(p: MlpPolicy, obs: PolicyObservation) -> Action:
    out = p.normalized_batch(obs.as_array())[0]
    return Action.from_normalized(out, p.v_max, p.omega_max)


@dataclass(frozen=True)
class SurrogateConfig:
    """Goal attraction plus repulsion from the closest ray.

    yaw_rate = clip(k_goal * yaw_rel + k_obs * R, +-omega_max) with
    R = +-(1 - d_min / d_safe_norm) * cos(bearing of the closest ray), signed
    to turn away from it, and zero once d_min >= d_safe_norm.
    speed = v_max * min(1, d_min / d_safe_norm) * max(0.2, 1 - |yaw_rel| / pi).
    """

    k_goal: float = 1.0
    k_obs: float = 2.0
    d_safe_norm: float = 0.4
    fov: float = math.pi / 2
    v_max: float = V_MAX
    omega_max: float = OMEGA_MAX


def _surrogate_arrays(depth: np.ndarray, yaw_rel_norm: np.ndarray, cfg: SurrogateConfig):
    depth = np.atleast_2d(depth)
    n = depth.shape[1]
    i_min = np.argmin(depth, axis=1)
    d_min = depth[np.arange(len(depth)), i_min]
    offs = cfg.fov * (i_min / (n - 1) - 0.5) if n > 1 else np.zeros(len(depth))
    # obstacle on the right (negative bearing) or dead ahead -> turn left;
    # push scales with proximity and with how close the ray is to the nose
    away = np.where(offs > 0, -1.0, 1.0)
    push = (1.0 - d_min / cfg.d_safe_norm) * np.cos(offs)
    rep = np.where(d_min < cfg.d_safe_norm, away * push, 0.0)
    yaw_rate = np.clip(cfg.k_goal * yaw_rel_norm * math.pi + cfg.k_obs * rep, -cfg.omega_max, cfg.omega_max)
    speed = cfg.v_max * np.minimum(1.0, d_min / cfg.d_safe_norm) * np.maximum(0.2, 1.0 - np.abs(yaw_rel_norm))
    return speed, yaw_rate


@dataclass
class SurrogatePolicy:
    cfg: SurrogateConfig = field(default_factory=SurrogateConfig)

    @property
    def v_max(self) -> float:
        return self.cfg.v_max

    @property
    def omega_max(self) -> float:
        return self.cfg.omega_max

    def act_batch(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        obs = np.atleast_2d(obs)
        return _surrogate_arrays(obs[:, :-2], obs[:, -1], self.cfg)

    def __call__(self, obs: PolicyObservation) -> Action:
        return surrogate(obs, self.cfg)


def surrogate(obs: PolicyObservation, cfg: SurrogateConfig = SurrogateConfig()) -> Action:
    speed, yaw_rate = _surrogate_arrays(obs.depth[None, :], np.array([obs.yaw_rel_norm]), cfg)
    return Action(float(speed[0]), float(yaw_rate[0]), cfg.v_max, cfg.omega_max)


def _header(p: MlpPolicy, d_scale: float | None) -> dict:
    return {
        "depth_sizes": list(p.net.depth_sizes),
        "trunk_sizes": list(p.net.trunk_sizes),
        "hidden_act": p.net.hidden_act,
        "out_act": p.net.out_act,
        "v_max": p.v_max,
        "omega_max": p.omega_max,
        "d_scale": d_scale,
    }


def save_policy(p: MlpPolicy, path, metadata: dict | None = None, d_scale: float | None = None) -> None:
    path = Path(path)
    header = json.dumps(_header(p, d_scale), sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in p.net.params)
    path.write_bytes(MAGIC + struct.pack("<II", FORMAT_VERSION, len(header)) + header + blob)
    side = {"format_version": FORMAT_VERSION, **_header(p, d_scale), "metadata": metadata or {}}
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def load_policy(path) -> MlpPolicy:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a policy file")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: format version {version}, this build reads version {FORMAT_VERSION}")
    if len(raw) < 12 + hlen:
        raise FormatError(f"{path}: truncated header")
    try:
        h = json.loads(raw[12:12 + hlen])
        net = BranchNet(h["depth_sizes"], h["trunk_sizes"], h["hidden_act"], h["out_act"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: bad header ({exc})") from exc
    data = raw[12 + hlen:]
    need = sum(int(np.prod(s)) for s in net.param_shapes()) * 8
    if len(data) != need:
        raise FormatError(f"{path}: expected {need} bytes of weights, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f8")
    params, k = [], 0
    for s in net.param_shapes():
        n = int(np.prod(s))
        params.append(flat[k:k + n].reshape(s).astype(np.float64))
        k += n
    if not all(np.all(np.isfinite(a)) for a in params):
        raise FormatError(f"{path}: non-finite weights")
    net.params = params
    return MlpPolicy(net, float(h["v_max"]), float(h["omega_max"]))


def load_d_scale(path) -> float | None:
    raw = Path(path).read_bytes()
    hlen = struct.unpack("<I", raw[8:12])[0]
    return json.loads(raw[12:12 + hlen]).get("d_scale")
