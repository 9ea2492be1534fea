"""Position/velocity Kalman filter with a PX4-style GPS innovation gate.

State is ``[x, y, vx, vy]``. Prediction is constant-velocity; an optional
inertial velocity increment ``dv`` plays the part of the IMU so that the
filter follows manoeuvres it cannot see in GPS. GPS fixes are fused only
when their test ratio ``y' S^-1 y / gate^2`` is at most one.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .geo import LocalPos

H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


class SingularInnovationCovariance(np.linalg.LinAlgError):
    pass


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class FusionConfig:
    # Tuned so a 3.3 m spoof step is absorbed in ~50 fixes without tripping
    # the gate and a sustained ramp is accepted up to ~1.6 m/s.
    q_accel: float = 0.03
    r_gps: float = 0.75
    gate: float = 5.0
    reject_window: int = 10
    gps_rate_hz: float = 10.0

    def __post_init__(self):
        if not (self.q_accel > 0 and self.r_gps > 0 and self.gps_rate_hz > 0 and self.reject_window > 0):
            raise ValueError(f"FusionConfig fields must be positive: {self}")
        if self.gate < 1:
            raise ValueError("gate must be >= 1")

    @property
    def dt(self) -> float:
        return 1.0 / self.gps_rate_hz


@dataclass(frozen=True)
class EkfEstimate:
    pos: LocalPos
    vel: tuple[float, float] = (0.0, 0.0)
    cov: np.ndarray = field(default_factory=lambda: np.eye(4))
    t: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return np.array([self.pos.x_east_m, self.pos.y_north_m, self.vel[0], self.vel[1]])

    @classmethod
    def from_state(cls, x: np.ndarray, cov: np.ndarray, t: float) -> "EkfEstimate":
        return cls(LocalPos(float(x[0]), float(x[1])), (float(x[2]), float(x[3])), cov, t)


class FusionOutcome(NamedTuple):
    est: EkfEstimate
    innovation: tuple[float, float]
    test_ratio: float
    accepted: bool


@dataclass(frozen=True)
class HealthStatus:
    kind: str = "Healthy"  # Healthy | Rejecting | SpoofSuspected
    count: int = 0

    def __str__(self):
        return f"Rejecting({self.count})" if self.kind == "Rejecting" else self.kind


HEALTHY = HealthStatus()


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def process_noise(q_accel: float, dt: float) -> np.ndarray:
    """Discrete white-acceleration noise, independent per axis."""
    g = np.array([0.5 * dt * dt, dt])
    q1 = q_accel**2 * np.outer(g, g)
    Q = np.zeros((4, 4))
    Q[np.ix_([0, 2], [0, 2])] = q1
    Q[np.ix_([1, 3], [1, 3])] = q1
    return Q


def predict(e: EkfEstimate, dt: float, cfg: FusionConfig, dv=None) -> EkfEstimate:
    """Propagate the estimate by ``dt``.

    With ``dv`` given, velocity is first bumped by the inertial increment and
    position integrated with the updated velocity, which reproduces the world's
    semi-implicit kinematics exactly. The covariance recursion is the same
    either way.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    F = transition(dt)
    x = F @ e.x
    if dv is not None:
        dv = np.asarray(dv, dtype=float)
        x[2:] += dv
        x[:2] += dv * dt
    cov = F @ e.cov @ F.T + process_noise(cfg.q_accel, dt)
    return EkfEstimate.from_state(x, 0.5 * (cov + cov.T), e.t + dt)


def innovation_stats(e_pred: EkfEstimate, z: LocalPos, cfg: FusionConfig):
    y = z.as_array() - H @ e_pred.x
    S = H @ e_pred.cov @ H.T + cfg.r_gps**2 * np.eye(2)
    if not np.all(np.isfinite(S)) or abs(np.linalg.det(S)) < 1e-300:
        raise SingularInnovationCovariance("innovation covariance is singular; check r_gps")
    test_ratio = float(y @ np.linalg.solve(S, y)) / cfg.gate**2
    return y, S, test_ratio


def fuse_gps(e_pred: EkfEstimate, z: LocalPos, cfg: FusionConfig) -> FusionOutcome:
    y, S, test_ratio = innovation_stats(e_pred, z, cfg)
    innov = (float(y[0]), float(y[1]))
    if test_ratio > 1.0:
        return FusionOutcome(e_pred, innov, test_ratio, False)
    P = e_pred.cov
    K = np.linalg.solve(S, H @ P).T  # P H' S^-1, S and P symmetric
    x = e_pred.x + K @ y
    I_KH = np.eye(4) - K @ H
    R = cfg.r_gps**2 * np.eye(2)
    cov = I_KH @ P @ I_KH.T + K @ R @ K.T
    est = EkfEstimate.from_state(x, 0.5 * (cov + cov.T), e_pred.t)
    return FusionOutcome(est, innov, test_ratio, True)


def monitor(prev: HealthStatus, outcome: FusionOutcome, cfg: FusionConfig) -> HealthStatus:
    if outcome.accepted:
        return HEALTHY
    if prev.kind == "SpoofSuspected":
        return prev
    count = prev.count + 1
    if count >= cfg.reject_window:
        return HealthStatus("SpoofSuspected", count)
    return HealthStatus("Rejecting", count)


class SteadyState(NamedTuple):
    K: np.ndarray
    S: np.ndarray
    P: np.ndarray  # posterior covariance
    iterations: int


def steady_state_gain(cfg: FusionConfig, dt: float | None = None, max_iter: int = 100_000) -> SteadyState:
    """Iterate the covariance recursion with zero innovation until it settles."""
    dt = cfg.dt if dt is None else dt
    e = EkfEstimate(LocalPos(0.0, 0.0), (0.0, 0.0), np.diag([cfg.r_gps**2] * 2 + [1.0, 1.0]))
    K = S = None
    for i in range(max_iter):
        pred = predict(e, dt, cfg)
        S = H @ pred.cov @ H.T + cfg.r_gps**2 * np.eye(2)
        K = np.linalg.solve(S, H @ pred.cov).T
        nxt = fuse_gps(pred, pred.pos, cfg).est
        if np.max(np.abs(nxt.cov - e.cov)) < 1e-12:
            return SteadyState(K, S, nxt.cov, i + 1)
        e = replace(nxt, t=0.0)
    raise NoConvergence(f"covariance did not settle in {max_iter} iterations")


class Ekf:
    """Stateful wrapper: one instance per simulated vehicle."""

    def __init__(self, cfg: FusionConfig, start: LocalPos, cov: np.ndarray | None = None):
        self.cfg = cfg
        if cov is None:
            cov = steady_state_gain(cfg).P
        self.est = EkfEstimate(start, (0.0, 0.0), cov, 0.0)
        self.health = HEALTHY

    def step(self, z: LocalPos, dt: float | None = None, dv=None) -> FusionOutcome:
        pred = predict(self.est, self.cfg.dt if dt is None else dt, self.cfg, dv)
        out = fuse_gps(pred, z, self.cfg)
        self.est = out.est
        self.health = monitor(self.health, out, self.cfg)
        return out
