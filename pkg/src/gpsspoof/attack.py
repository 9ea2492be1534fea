"""Spoofing attacks on the navigation stack and tools to size the spoofing envelope.

* ``unconstrained_search`` - grid search over spoofed positions fed straight
  to the policy (no estimator in the way).
* ``spoof_signal`` - incremental spoofing that keeps every fix inside the
  estimator's gate: signal = observed truth + running offset.
* ``constrained_step`` - uniform-field directive used to drag the vehicle
  into an obstacle with small per-step increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .estimator import Ekf, FusionConfig
from .geo import LocalPos, bearing, wrap_angle, wrap_angle_array
from .policy import TargetSpec, compute_rel_batch, normalize_rel
from .world import DT, Action, DepthScan, UavState

MAX_STEP_M = 0.1
THETA_TOL = 0.35

UNCONSTRAINED = "Unconstrained"
CONSTRAINED = "Constrained"

# Direction rule for the constrained field.
DIRECTION_PRINTED = "col_minus_tar"  # normalize(pos_col - pos_tar)
DIRECTION_UAV = "col_minus_uav"      # normalize(pos_col - pos_uav)
DIRECTION_REVERSED = "tar_minus_col"  # normalize(pos_tar - pos_col)
DIRECTION_UAV_REVERSED = "uav_minus_col"  # normalize(pos_uav - pos_col)
DIRECTIONS = (DIRECTION_PRINTED, DIRECTION_UAV, DIRECTION_REVERSED, DIRECTION_UAV_REVERSED)


class NotFound(LookupError):
    pass


class DegenerateDirection(ValueError):
    pass


class NeverConverges(RuntimeError):
    pass


@dataclass(frozen=True)
class SpoofDirective:
    delta_p: LocalPos
    repeats_T: int = 1
    mode: str = CONSTRAINED
    max_step_m: float = MAX_STEP_M

    def __post_init__(self):
        if self.repeats_T < 1:
            raise ValueError("repeats_T must be >= 1")
        if self.mode == CONSTRAINED and self.delta_p.norm() > self.max_step_m + 1e-12:
            raise ValueError(f"constrained step {self.delta_p.norm():.4f} m exceeds {self.max_step_m} m")


@dataclass
class AttackState:
    n: int = 0
    cumulative: LocalPos = LocalPos(0.0, 0.0)
    observed_truth: LocalPos = LocalPos(0.0, 0.0)
    issued: list = field(default_factory=list)

    def observe(self, truth: LocalPos) -> None:
        self.observed_truth = truth


@dataclass(frozen=True)
class SearchGrid:
    radius_P: float = 50.0
    resolution: float = 1.0

    def __post_init__(self):
        if self.radius_P < 0 or not self.resolution > 0:
            raise ValueError("need radius_P >= 0 and resolution > 0")
        if self.radius_P > 0 and self.resolution > self.radius_P:
            raise ValueError("resolution must not exceed radius_P")

    def offsets(self) -> np.ndarray:
        """Candidate offsets, nearest first; equal distances keep row-major order."""
        k = int(math.floor(self.radius_P / self.resolution + 1e-9))
        ax = np.arange(-k, k + 1) * self.resolution
        gx, gy = np.meshgrid(ax, ax)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        order = np.argsort(np.hypot(pts[:, 0], pts[:, 1]), kind="stable")
        return pts[order]


def heading_error(a: Action, uav: UavState, obstacle_center: LocalPos, dt: float = DT) -> float:
    return wrap_angle(uav.yaw + a.yaw_rate_cmd * dt - bearing(uav.pos, obstacle_center))


def condition_collision(a: Action, uav: UavState, obstacle_center: LocalPos,
                        theta_tol: float = THETA_TOL, dt: float = DT) -> bool:
    """Would this action keep the nose on the obstacle at a useful speed?"""
    err = heading_error(a, uav, obstacle_center, dt)
    return -theta_tol <= err <= theta_tol and a.speed_cmd >= 0.5 * a.v_max


class SearchResult(NamedTuple):
    spoofed: LocalPos
    action: Action
    heading_error: float
    candidates: int
    satisfied: bool = True


def unconstrained_search(policy, depth: DepthScan, uav: UavState, tgt: TargetSpec, grid: SearchGrid,
                         obstacle_center: LocalPos, theta_tol: float = THETA_TOL, dt: float = DT,
                         best_effort: bool = False) -> SearchResult:
    """Find the spoofed position whose induced action best points the UAV at the obstacle.

    Candidates closer to the true position win ties. Raises ``NotFound`` when
    no candidate satisfies ``condition_collision``, unless ``best_effort`` is
    set, in which case the candidate with the smallest heading error is
    returned with ``satisfied=False``.
    """
    offsets = grid.offsets()
    cand = uav.pos.as_array() + offsets
    d_rel, yaw_rel = compute_rel_batch(cand, uav.yaw, tgt)
    ok_rel = d_rel > 0
    dn, yn = normalize_rel(d_rel, yaw_rel, tgt.d_scale)
    obs = np.column_stack([np.tile(depth.ranges, (len(cand), 1)), dn, yn])
    speed, yaw_rate = policy.act_batch(obs)
    speed = np.clip(speed, 0.0, policy.v_max)
    yaw_rate = np.clip(yaw_rate, -policy.omega_max, policy.omega_max)
    err = wrap_angle_array(uav.yaw + yaw_rate * dt - bearing(uav.pos, obstacle_center))
    good = ok_rel & (np.abs(err) <= theta_tol) & (speed >= 0.5 * policy.v_max)
    satisfied = bool(good.any())
    if not satisfied:
        if not best_effort:
            raise NotFound("no spoofed position induces a collision course")
        good = ok_rel
    idx = np.flatnonzero(good)
    best = idx[np.argmin(np.abs(err[idx]))]  # argmin keeps the first (nearest) on ties
    a = Action(float(speed[best]), float(yaw_rate[best]), policy.v_max, policy.omega_max)
    return SearchResult(LocalPos.from_array(cand[best]), a, float(err[best]), len(cand), satisfied)


def spoof_signal(st: AttackState, directive: SpoofDirective) -> list[LocalPos]:
    """Emit ``repeats_T`` copies of truth + (running offset + this step) and advance the state."""
    total = st.cumulative + directive.delta_p
    sig = st.observed_truth + total
    st.cumulative = total
    st.n += 1
    st.issued.append(directive.delta_p)
    return [sig] * directive.repeats_T


def constrained_step(pos_col: LocalPos, pos_tar: LocalPos, step_m: float = MAX_STEP_M,
                     max_step_m: float = MAX_STEP_M) -> SpoofDirective:
    if step_m > max_step_m + 1e-12:
        raise ValueError(f"step {step_m} m exceeds the {max_step_m} m limit")
    d = pos_col - pos_tar
    n = d.norm()
    if n == 0.0:
        raise DegenerateDirection("collision point coincides with the reference point")
    return SpoofDirective(LocalPos(step_m * d.x_east_m / n, step_m * d.y_north_m / n), 1, CONSTRAINED, max_step_m)


def field_directive(direction: str, pos_col: LocalPos, pos_tar: LocalPos, pos_uav: LocalPos,
                    step_m: float = MAX_STEP_M, max_step_m: float = MAX_STEP_M) -> SpoofDirective:
    """``constrained_step`` under one of the selectable direction rules."""
    if direction == DIRECTION_PRINTED:
        return constrained_step(pos_col, pos_tar, step_m, max_step_m)
    if direction == DIRECTION_UAV:
        return constrained_step(pos_col, pos_uav, step_m, max_step_m)
    if direction == DIRECTION_REVERSED:
        return constrained_step(pos_tar, pos_col, step_m, max_step_m)
    if direction == DIRECTION_UAV_REVERSED:
        return constrained_step(pos_uav, pos_col, step_m, max_step_m)
    raise ValueError(f"unknown direction rule {direction!r}")


# -- envelope analysis ---------------------------------------------------------

class DelayResult(NamedTuple):
    T: int
    max_test_ratio: float


def measure_reflection_delay(cfg: FusionConfig, offset: LocalPos, max_samples: int = 1000,
                             fraction: float = 0.95) -> DelayResult:
    """Fixes needed before a stationary estimate absorbs ``fraction`` of a step spoof."""
    mag = offset.norm()
    if mag == 0.0:
        return DelayResult(0, 0.0)
    truth = LocalPos(0.0, 0.0)
    ekf = Ekf(cfg, truth)
    z = truth + offset
    worst = 0.0
    for k in range(1, max_samples + 1):
        out = ekf.step(z)
        worst = max(worst, out.test_ratio)
        if (ekf.est.pos - truth).norm() >= fraction * mag:
            return DelayResult(k, worst)
    raise NeverConverges(f"estimate never absorbed a {mag:.2f} m offset (max test ratio {worst:.2f})")


class DriftRun(NamedTuple):
    test_ratios: np.ndarray
    accepted: np.ndarray
    offsets: np.ndarray        # estimate minus truth, per fix
    health_ok: bool


def simulate_drift(cfg: FusionConfig, rate_mps: float, duration_s: float = 60.0,
                   direction=(0.0, 1.0), step_dt: float = DT) -> DriftRun:
    """Incremental spoofing of a stationary vehicle: the offset grows by rate*dt per policy step."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    delta = LocalPos.from_array(u * rate_mps * step_dt)
    per_step = max(1, int(round(step_dt * cfg.gps_rate_hz)))
    truth = LocalPos(0.0, 0.0)
    ekf = Ekf(cfg, truth)
    st = AttackState(observed_truth=truth)
    n_steps = int(round(duration_s / step_dt))
    trs, acc, offs = [], [], []
    healthy = True
    for _ in range(n_steps):
        for z in spoof_signal(st, SpoofDirective(delta, per_step, UNCONSTRAINED)):
            out = ekf.step(z)
            trs.append(out.test_ratio)
            acc.append(out.accepted)
            offs.append(ekf.est.pos.as_array())
            healthy &= ekf.health.kind == "Healthy"
    return DriftRun(np.array(trs), np.array(acc), np.array(offs), healthy)


def drift_feasible(cfg: FusionConfig, rate_mps: float, duration_s: float = 60.0) -> bool:
    return bool(np.all(simulate_drift(cfg, rate_mps, duration_s).test_ratios < 1.0))


def max_undetected_rate(cfg: FusionConfig, duration_s: float = 60.0, resolution: float = 0.01,
                        hi: float = 50.0) -> float:
    """Largest constant drift rate (m/s) that never trips the gate, to ``resolution``."""
    lo = 0.0
    if drift_feasible(cfg, hi, duration_s):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if drift_feasible(cfg, mid, duration_s):
            lo = mid
        else:
            hi = mid
    return lo


class StaircaseRun(NamedTuple):
    t: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    spoofed: np.ndarray
    test_ratios: np.ndarray


def simulate_staircase(cfg: FusionConfig, step_m: float, every_n: int, attack_start_s: float,
                       duration_s: float, direction=(0.0, 1.0), noise=None) -> StaircaseRun:
    """Step the spoofed fix by ``step_m`` every ``every_n`` fixes after ``attack_start_s``.

    ``noise`` is an optional ``GpsNoiseModel``-like object with ``draw(seq)``.
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    truth = LocalPos(0.0, 0.0)
    ekf = Ekf(cfg, truth)
    n = int(round(duration_s * cfg.gps_rate_hz))
    k0 = int(round(attack_start_s * cfg.gps_rate_hz))
    ts, est, sp, trs = [], [], [], []
    for k in range(n):
        steps = 0 if k < k0 else (k - k0) // every_n + 1
        off = u * step_m * steps
        e = noise.draw(k) if noise is not None else np.zeros(2)
        z = LocalPos.from_array(truth.as_array() + off + e)
        out = ekf.step(z)
        ts.append((k + 1) / cfg.gps_rate_hz)
        est.append(ekf.est.pos.as_array())
        sp.append(z.as_array())
        trs.append(out.test_ratio)
    t = np.array(ts)
    return StaircaseRun(t, np.zeros((n, 2)), np.array(est), np.array(sp), np.array(trs))
