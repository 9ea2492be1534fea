"""Scenario configuration and its TOML file format.

Example::

    schema_version = 1
    name = "fig8a"
    dt_policy = 0.1
    duration_s = 120.0
    seed = 0

    [environment]
    start = [0.0, 0.0]
    target = [0.0, 150.0]
    obstacles = [[0.0, 100.0, 5.0]]    # x, y, radius

    [policy]
    kind = "surrogate"                  # or "weights" with path = "..."

    [attack]
    kind = "constrained"                # none | unconstrained | constrained
    step_m = 0.1

    [fusion]
    r_gps = 0.75

    [noise]
    sigma = 0.0

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .attack import DIRECTION_REVERSED, DIRECTIONS, MAX_STEP_M, THETA_TOL, SearchGrid
from .estimator import FusionConfig
from .geo import FlatEarthFrame, GeoCoord, LocalPos
from .gps import GpsNoiseModel
from .policy import SurrogateConfig
from .world import DT, Bounds, Circle, Environment

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    n_rays: int = 16
    fov: float = math.pi / 2
    max_range: float = 20.0


@dataclass(frozen=True)
class PolicySource:
    kind: str = "surrogate"  # surrogate | weights
    path: str | None = None
    d_scale: float | None = None  # None -> initial distance to target
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "none"  # none | unconstrained | constrained
    start_s: float = 0.0
    # constrained
    step_m: float = MAX_STEP_M
    max_step_m: float = MAX_STEP_M
    direction: str = DIRECTION_REVERSED
    obstacle_index: int = 0
    # unconstrained
    grid: SearchGrid = field(default_factory=SearchGrid)
    theta_tol: float = THETA_TOL
    trigger_range_m: float = 20.0


@dataclass(frozen=True)
class ScenarioConfig:
    environment: Environment
    name: str = "scenario"
    start_yaw: float | None = None  # None -> face the target
    sensor: SensorConfig = field(default_factory=SensorConfig)
    policy: PolicySource = field(default_factory=PolicySource)
    attack: AttackConfig = field(default_factory=AttackConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    noise: GpsNoiseModel = field(default_factory=GpsNoiseModel)
    frame: FlatEarthFrame = field(default_factory=FlatEarthFrame)
    dt_policy: float = DT
    duration_s: float = 120.0
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {self.schema_version} unsupported (expected {SCHEMA_VERSION})")
        if not self.dt_policy > 0 or self.duration_s < 0:
            raise ConfigError("dt_policy must be positive and duration_s nonnegative")
        m = self.dt_policy * self.fusion.gps_rate_hz
        if abs(m - round(m)) > 1e-9 or round(m) < 1:
            raise ConfigError(f"dt_policy * gps_rate_hz = {m} is not a positive integer")
        if self.policy.kind not in ("surrogate", "weights"):
            raise ConfigError(f"unknown policy kind {self.policy.kind!r}")
        if self.policy.kind == "weights" and not self.policy.path:
            raise ConfigError("policy.kind = 'weights' needs policy.path")
        if self.attack.kind not in ("none", "unconstrained", "constrained"):
            raise ConfigError(f"unknown attack kind {self.attack.kind!r}")
        if self.attack.direction not in DIRECTIONS:
            raise ConfigError(f"attack.direction must be one of {DIRECTIONS}")
        if self.attack.kind != "none" and not self.environment.obstacles:
            raise ConfigError("attacks need at least one obstacle")
        if self.attack.kind == "constrained" and self.attack.step_m > self.attack.max_step_m:
            raise ConfigError("attack.step_m exceeds attack.max_step_m")
        if not 0 <= self.attack.obstacle_index < max(1, len(self.environment.obstacles)):
            raise ConfigError("attack.obstacle_index out of range")

    @property
    def gps_per_step(self) -> int:
        return int(round(self.dt_policy * self.fusion.gps_rate_hz))


def _take(table: dict, allowed: set[str], where: str) -> dict:
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(extra))}")
    return dict(table)


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _pos(v, what: str) -> LocalPos:
    try:
        x, y = v
        return LocalPos(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be [x, y]") from exc


def _build(cls, table: dict, where: str):
    try:
        return cls(**_take(table, _names(cls), where))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{where}]: {exc}") from exc


def from_dict(d: dict) -> ScenarioConfig:
    top = _take(d, {"schema_version", "name", "start_yaw", "dt_policy", "duration_s", "seed", "environment",
                    "sensor", "policy", "attack", "fusion", "noise", "frame"}, "root")
    if "schema_version" not in top:
        raise ConfigError("missing schema_version")
    if "environment" not in top:
        raise ConfigError("missing [environment]")
    env_t = _take(top.pop("environment"), {"start", "target", "obstacles", "collision_radius", "goal_radius",
                                           "bounds"}, "environment")
    try:
        obstacles = tuple(Circle(LocalPos(float(x), float(y)), float(r)) for x, y, r in env_t.pop("obstacles", []))
    except (TypeError, ValueError) as exc:
        raise ConfigError("environment.obstacles must be a list of [x, y, radius]") from exc
    bounds = _build(Bounds, env_t.pop("bounds", {}), "environment.bounds")
    if "target" not in env_t:
        raise ConfigError("environment.target is required")
    try:
        env = Environment(obstacles=obstacles, target=_pos(env_t.pop("target"), "target"),
                          start=_pos(env_t.pop("start", [0.0, 0.0]), "start"), bounds=bounds,
                          **{k: float(v) for k, v in env_t.items()})
    except ValueError as exc:
        raise ConfigError(f"[environment]: {exc}") from exc

    kw: dict = {"environment": env}
    if "sensor" in top:
        kw["sensor"] = _build(SensorConfig, top.pop("sensor"), "sensor")
    if "policy" in top:
        p = _take(top.pop("policy"), {"kind", "path", "d_scale", "surrogate"}, "policy")
        sur = _build(SurrogateConfig, p.pop("surrogate", {}), "policy.surrogate")
        kw["policy"] = _build(PolicySource, {**p, "surrogate": sur}, "policy")
    if "attack" in top:
        a = _take(top.pop("attack"), _names(AttackConfig), "attack")
        grid = _build(SearchGrid, a.pop("grid", {}), "attack.grid")
        kw["attack"] = _build(AttackConfig, {**a, "grid": grid}, "attack")
    if "fusion" in top:
        kw["fusion"] = _build(FusionConfig, top.pop("fusion"), "fusion")
    seed = int(top.get("seed", 0))
    noise_t = top.pop("noise", {})
    kw["noise"] = _build(GpsNoiseModel, {"seed": seed, **noise_t}, "noise")
    if "frame" in top:
        f = _take(top.pop("frame"), {"origin", "meters_per_degree"}, "frame")
        origin = f.pop("origin", None)
        if origin is not None:
            try:
                f["origin"] = GeoCoord(*[float(v) for v in origin])
            except (TypeError, ValueError) as exc:
                raise ConfigError("frame.origin must be [lat, lon, alt]") from exc
        kw["frame"] = _build(FlatEarthFrame, f, "frame")
    try:
        return ScenarioConfig(**kw, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)


def to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of ``from_dict`` (None-valued optional keys are dropped)."""
    env = cfg.environment
    d = {
        "schema_version": cfg.schema_version,
        "name": cfg.name,
        "dt_policy": cfg.dt_policy,
        "duration_s": cfg.duration_s,
        "seed": cfg.seed,
        "environment": {
            "start": [env.start.x_east_m, env.start.y_north_m],
            "target": [env.target.x_east_m, env.target.y_north_m],
            "obstacles": [[c.center.x_east_m, c.center.y_north_m, c.radius] for c in env.obstacles],
            "collision_radius": env.collision_radius,
            "goal_radius": env.goal_radius,
            "bounds": asdict(env.bounds),
        },
        "sensor": asdict(cfg.sensor),
        "policy": {k: v for k, v in asdict(cfg.policy).items() if v is not None},
        "attack": asdict(cfg.attack),
        "fusion": asdict(cfg.fusion),
        "noise": asdict(cfg.noise),
        "frame": {"origin": [cfg.frame.origin.lat_deg, cfg.frame.origin.lon_deg, cfg.frame.origin.alt_m],
                  "meters_per_degree": cfg.frame.meters_per_degree},
    }
    if cfg.start_yaw is not None:
        d["start_yaw"] = cfg.start_yaw
    return d


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, seed=seed, noise=replace(cfg.noise, seed=seed))
