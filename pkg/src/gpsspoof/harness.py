"""Closed-loop runner: world -> GPS channel -> estimator -> policy, with an optional attacker."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .attack import AttackState, field_directive, spoof_signal, unconstrained_search
from .config import ScenarioConfig
from .estimator import Ekf
from .geo import LocalPos, bearing
from .gps import inject_spoof, message_local, sample_gps
from .policy import (
    DegenerateRelative,
    FormatError,
    SurrogatePolicy,
    TargetSpec,
    compute_rel,
    load_policy,
    make_observation,
)
from .world import Action, UavState, check_collision, ray_depth, step_kinematics


class PolicyLoadError(RuntimeError):
    pass


REACHED = "ReachedTarget"
COLLIDED = "Collided"
TIMEOUT = "Timeout"
SPOOF_DETECTED = "SpoofDetected"


@dataclass(frozen=True)
class Verdict:
    kind: str
    t: float | None = None
    reason: str = ""

    def __str__(self):
        return self.kind if self.t is None else f"{self.kind}({self.t:.1f})"


class TrajectoryRecord(NamedTuple):
    t: float
    true_x: float
    true_y: float
    est_x: float
    est_y: float
    input_x: float     # position actually fed to the policy
    input_y: float
    gps_lat: float
    gps_lon: float
    test_ratio: float
    accepted: bool
    health: str
    d_rel: float
    yaw_rel: float
    speed_cmd: float
    yaw_rate_cmd: float
    min_obstacle_dist: float
    spoof_x: float     # offset carried by the GPS fix (constrained) or injected position offset
    spoof_y: float
    event: str


RECORD_COLUMNS = TrajectoryRecord._fields


def load_scenario_policy(cfg: ScenarioConfig):
    if cfg.policy.kind == "surrogate":
        s = cfg.policy.surrogate
        return SurrogatePolicy(replace(s, fov=cfg.sensor.fov))
    try:
        return load_policy(cfg.policy.path)
    except (OSError, FormatError) as exc:
        raise PolicyLoadError(f"cannot load policy {cfg.policy.path}: {exc}") from exc


def run_scenario(cfg: ScenarioConfig, policy=None, gps_log: list | None = None
                 ) -> tuple[list[TrajectoryRecord], Verdict]:
    """Fly one mission. ``policy`` overrides the configured source when given;
    every GPS message fed to the estimator is appended to ``gps_log`` if given."""
    env = cfg.environment
    policy = load_scenario_policy(cfg) if policy is None else policy
    d0 = (env.target - env.start).norm()
    tgt = TargetSpec(env.target, cfg.policy.d_scale or max(d0, 1e-6))
    yaw0 = bearing(env.start, env.target) if cfg.start_yaw is None else cfg.start_yaw
    uav = UavState(env.start, yaw0, 0.0)
    ekf = Ekf(cfg.fusion, env.start)
    m = cfg.gps_per_step
    dt_gps = 1.0 / cfg.fusion.gps_rate_hz
    att = AttackState(observed_truth=env.start)
    col = env.obstacles[cfg.attack.obstacle_index].center if env.obstacles else None
    n_steps = int(math.ceil(cfg.duration_s / cfg.dt_policy - 1e-9))

    records: list[TrajectoryRecord] = []
    prev_pos, prev_vel = uav.pos, uav.velocity()
    vel = prev_vel
    seq = 0
    k = 0
    while True:
        t = k * cfg.dt_policy
        event = ""
        # attacker: one directive per policy step, held across the m fixes in it
        offset = LocalPos(0.0, 0.0)
        if cfg.attack.kind == "constrained" and t >= cfg.attack.start_s - 1e-9:
            att.observe(uav.pos)
            d = field_directive(cfg.attack.direction, col, env.target, uav.pos,
                                cfg.attack.step_m, cfg.attack.max_step_m)
            d = replace(d, repeats_T=m)
            sigs = spoof_signal(att, d)
            offset = sigs[0] - uav.pos
            event = "directive"

        # GPS fixes along the straight segment flown since the last decision
        outcome = None
        worst_tr, all_ok = 0.0, True
        for j in range(1, m + 1):
            frac = j / m
            p_true = LocalPos(prev_pos.x_east_m + frac * (uav.pos.x_east_m - prev_pos.x_east_m),
                              prev_pos.y_north_m + frac * (uav.pos.y_north_m - prev_pos.y_north_m))
            msg = sample_gps(UavState(p_true, uav.yaw, uav.speed), cfg.frame, cfg.noise, t - (1 - frac) * cfg.dt_policy, seq)
            seq += 1
            msg = inject_spoof(msg, offset, cfg.frame)
            if gps_log is not None:
                gps_log.append(msg)
            dv = (vel - prev_vel) if j == 1 else None
            outcome = ekf.step(message_local(msg, cfg.frame), dt_gps, dv)
            worst_tr = max(worst_tr, outcome.test_ratio)
            all_ok &= outcome.accepted
        est = ekf.est.pos
        pos_in = est

        depth = ray_depth(uav, env, cfg.sensor.n_rays, cfg.sensor.fov, cfg.sensor.max_range)
        coll = check_collision(uav, env)

        if cfg.attack.kind == "unconstrained" and t >= cfg.attack.start_s - 1e-9:
            if coll.min_dist <= cfg.attack.trigger_range_m:
                res = unconstrained_search(policy, depth, uav, tgt, cfg.attack.grid, col,
                                           cfg.attack.theta_tol, cfg.dt_policy, best_effort=True)
                pos_in = res.spoofed
                event = "search_found" if res.satisfied else "search_fallback"
        spoof_off = pos_in - est if cfg.attack.kind == "unconstrained" else offset

        try:
            rel = compute_rel(pos_in, uav.yaw, tgt)
            action = policy(make_observation(depth, rel, tgt))
        except DegenerateRelative:
            rel = None
            action = Action(0.0, 0.0, policy.v_max, policy.omega_max)

        records.append(TrajectoryRecord(
            round(t, 9), uav.pos.x_east_m, uav.pos.y_north_m, est.x_east_m, est.y_north_m,
            pos_in.x_east_m, pos_in.y_north_m, msg.coord.lat_deg, msg.coord.lon_deg, worst_tr, all_ok,
            str(ekf.health), rel.d_rel if rel else 0.0, rel.yaw_rel if rel else 0.0,
            action.speed_cmd, action.yaw_rate_cmd, coll.min_dist, spoof_off.x_east_m, spoof_off.y_north_m, event,
        ))

        if coll.collided:
            return records, Verdict(COLLIDED, t)
        if (uav.pos - env.target).norm() <= env.goal_radius:
            return records, Verdict(REACHED, t)
        if ekf.health.kind == "SpoofSuspected":
            return records, Verdict(SPOOF_DETECTED, t)
        if not env.bounds.contains(uav.pos):
            return records, Verdict(TIMEOUT, t, "left bounds")
        if k >= n_steps:
            return records, Verdict(TIMEOUT, t)

        prev_pos, prev_vel = uav.pos, uav.velocity()
        uav = step_kinematics(uav, action, cfg.dt_policy)
        vel = uav.velocity()
        k += 1


def summarize(records: list[TrajectoryRecord], verdict: Verdict) -> dict:
    if not records:
        return {"verdict": verdict.kind, "t": verdict.t, "steps": 0}
    last = records[-1]
    return {
        "verdict": verdict.kind,
        "t": verdict.t,
        "reason": verdict.reason,
        "steps": len(records),
        "min_obstacle_dist": float(min(r.min_obstacle_dist for r in records)),
        "max_test_ratio": float(max(r.test_ratio for r in records)),
        "final_estimate_offset_m": float(math.hypot(last.est_x - last.true_x, last.est_y - last.true_y)),
        "final_true_pos": [last.true_x, last.true_y],
    }


# -- export ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def format_record(r: TrajectoryRecord) -> str:
    return ",".join(_fmt(v) for v in r)


def export(records: list[TrajectoryRecord], out_dir, prefix: str = "") -> list[Path]:
    """Write the trajectory table and the plot series; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = out / f"{prefix}trajectory.csv"
    traj.write_text("\n".join([",".join(RECORD_COLUMNS)] + [format_record(r) for r in records]) + "\n")
    paths = out / f"{prefix}paths.csv"
    paths.write_text("\n".join(["t,true_x,true_y,est_x,est_y"] + [
        f"{r.t:.3f},{r.true_x:.6f},{r.true_y:.6f},{r.est_x:.6f},{r.est_y:.6f}" for r in records]) + "\n")
    tr = out / f"{prefix}test_ratio.csv"
    tr.write_text("\n".join(["t,test_ratio,accepted"] + [
        f"{r.t:.3f},{r.test_ratio:.9f},{int(r.accepted)}" for r in records]) + "\n")
    return [traj, paths, tr]


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")

