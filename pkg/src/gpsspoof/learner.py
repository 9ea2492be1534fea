"""Small TD3 trainer for the navigation policy (numpy only).

Actor and critics are ``BranchNet``s. Critics take the normalised action as
two extra trunk inputs next to the physical state. Training runs a two-stage
curriculum: open-space goals first, then one obstacle near the route.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .geo import LocalPos, bearing
from .nets import Adam, BranchNet
from .policy import MlpPolicy, TargetSpec, compute_rel, normalize_rel
from .world import (
    DT,
    Action,
    Bounds,
    Circle,
    Environment,
    UavState,
    check_collision,
    ray_depth,
    step_kinematics,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardConfig:
    k_prog: float = 1.0
    collision_penalty: float = 10.0
    goal_bonus: float = 10.0
    step_penalty: float = 0.01


def reward(prev: UavState, nxt: UavState, env: Environment, rc: RewardConfig = RewardConfig()) -> float:
    d_prev = (env.target - prev.pos).norm()
    d_next = (env.target - nxt.pos).norm()
    r = rc.k_prog * (d_prev - d_next) - rc.step_penalty
    if check_collision(nxt, env).collided:
        r -= rc.collision_penalty
    elif d_next <= env.goal_radius:
        r += rc.goal_bonus
    return r


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """G_t = sum_k gamma^k r_{t+k}, via the backward recursion."""
    g = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        g[t] = acc
    return g


@dataclass(frozen=True)
class Td3Config:
    gamma: float = 0.99
    polyak: float = 0.995
    policy_delay: int = 2
    target_noise_sigma: float = 0.2
    noise_clip: float = 0.5
    batch_size: int = 128
    learning_rate: float = 1e-3
    exploration_sigma: float = 0.1
    total_steps: int = 150_000
    seed: int = 0
    buffer_capacity: int = 100_000
    start_steps: int = 5_000      # uniform random actions before the actor takes over
    update_after: int = 1_000
    curriculum_split: float = 0.3  # fraction of steps spent without obstacles
    max_episode_steps: int = 400
    n_rays: int = 16
    depth_hidden: tuple = (32, 16)
    trunk_hidden: tuple = (64, 64)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if not (0 < self.gamma < 1 and 0 < self.polyak < 1):
            raise ValueError("gamma and polyak must lie in (0, 1)")
        if self.policy_delay < 1 or self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("bad Td3Config counts")
        if self.target_noise_sigma < 0 or self.noise_clip < 0 or self.exploration_sigma < 0:
            raise ValueError("noise parameters must be nonnegative")


class Transition(NamedTuple):
    s: np.ndarray
    a: np.ndarray  # normalised, in [-1, 1]^2
    r: float
    s2: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int = 2, seed: int = 0):
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, act_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.ptr = 0
        self.size = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return self.size

    def add(self, tr: Transition) -> None:
        i = self.ptr
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = tr.s, tr.a, tr.r, tr.s2, float(tr.done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int) -> dict:
        idx = self.rng.integers(0, self.size, size=n)
        return {"s": self.s[idx], "a": self.a[idx], "r": self.r[idx], "s2": self.s2[idx], "done": self.done[idx]}


# -- networks -----------------------------------------------------------------

def _split(obs: np.ndarray, n_rays: int):
    return obs[:, :n_rays], obs[:, n_rays:]


def actor_out(actor: BranchNet, obs: np.ndarray) -> np.ndarray:
    d, p = _split(obs, actor.depth_sizes[0])
    return actor.forward(d, p)


def critic_q(critic: BranchNet, obs: np.ndarray, act: np.ndarray, keep: bool = False):
    d, p = _split(obs, critic.depth_sizes[0])
    return critic.forward(d, np.concatenate([p, act], axis=1), keep=keep)


def build_critic(n_rays: int, depth_hidden, trunk_hidden, rng=None) -> BranchNet:
    depth_sizes = [n_rays, *depth_hidden]
    net = BranchNet(depth_sizes, [depth_sizes[-1] + 4, *trunk_hidden, 1], "relu", "linear")
    if rng is not None:
        net.init(rng)
    return net


@dataclass
class CriticPair:
    q1: BranchNet
    q2: BranchNet
    q1_targ: BranchNet
    q2_targ: BranchNet
    actor_targ: BranchNet
    opt1: Adam | None = None
    opt2: Adam | None = None

    @classmethod
    def create(cls, actor: BranchNet, q1: BranchNet, q2: BranchNet, lr: float) -> "CriticPair":
        return cls(q1, q2, q1.copy(), q2.copy(), actor.copy(), Adam(q1.params, lr), Adam(q2.params, lr))


def smoothed_target_action(actor_target: BranchNet, s2: np.ndarray, cfg: Td3Config,
                           rng: np.random.Generator) -> np.ndarray:
    a = actor_out(actor_target, s2)
    eps = rng.normal(0.0, 1.0, size=a.shape) * cfg.target_noise_sigma
    return np.clip(a + np.clip(eps, -cfg.noise_clip, cfg.noise_clip), -1.0, 1.0)


def td_target(batch: dict, critics: CriticPair, cfg: Td3Config, rng: np.random.Generator) -> np.ndarray:
    a2 = smoothed_target_action(critics.actor_targ, batch["s2"], cfg, rng)
    q1 = critic_q(critics.q1_targ, batch["s2"], a2)[:, 0]
    q2 = critic_q(critics.q2_targ, batch["s2"], a2)[:, 0]
    return batch["r"] + cfg.gamma * (1.0 - batch["done"]) * np.minimum(q1, q2)


def critic_loss_grads(critic: BranchNet, s: np.ndarray, a: np.ndarray, y: np.ndarray):
    q, cache = critic_q(critic, s, a, keep=True)
    err = q[:, 0] - y
    loss = float(np.mean(err**2))
    grads, _ = critic.backward(cache, (2.0 * err / len(y))[:, None])
    return loss, grads


def critic_update(batch: dict, critics: CriticPair, cfg: Td3Config, rng: np.random.Generator):
    """One MSE step on both critics toward the clipped double-Q target; returns both losses."""
    y = td_target(batch, critics, cfg, rng)
    l1, g1 = critic_loss_grads(critics.q1, batch["s"], batch["a"], y)
    l2, g2 = critic_loss_grads(critics.q2, batch["s"], batch["a"], y)
    critics.opt1.step(critics.q1.params, g1)
    critics.opt2.step(critics.q2.params, g2)
    return l1, l2


def actor_loss_grads(actor: BranchNet, critic: BranchNet, s: np.ndarray):
    """Loss -mean Q1(s, pi(s)) and its gradient w.r.t. the actor parameters."""
    d, p = _split(s, actor.depth_sizes[0])
    a, a_cache = actor.forward(d, p, keep=True)
    q, q_cache = critic_q(critic, s, a, keep=True)
    n = len(s)
    _, g_extra = critic.backward(q_cache, np.full((n, 1), -1.0 / n))
    grads, _ = actor.backward(a_cache, g_extra[:, -a.shape[1]:])
    return float(-np.mean(q)), grads


def actor_update(batch: dict, actor: BranchNet, critic1: BranchNet, opt: Adam) -> float:
    loss, grads = actor_loss_grads(actor, critic1, batch["s"])
    opt.step(actor.params, grads)
    return loss


def polyak_update(online: BranchNet, target: BranchNet, tau: float) -> BranchNet:
    """target <- tau * target + (1 - tau) * online, in place."""
    for t, o in zip(target.params, online.params):
        t *= tau
        t += (1.0 - tau) * o
    return target


def td3_update(batch: dict, actor: BranchNet, critics: CriticPair, actor_opt: Adam, cfg: Td3Config,
               rng: np.random.Generator, n_update: int) -> bool:
    """Critic step every call; actor and target averaging on every ``policy_delay``-th call.

    Returns whether the actor was updated.
    """
    critic_update(batch, critics, cfg, rng)
    if n_update % cfg.policy_delay:
        return False
    actor_update(batch, actor, critics.q1, actor_opt)
    polyak_update(critics.q1, critics.q1_targ, cfg.polyak)
    polyak_update(critics.q2, critics.q2_targ, cfg.polyak)
    polyak_update(actor, critics.actor_targ, cfg.polyak)
    return True


# -- training environment -------------------------------------------------------

class NavTask:
    """Episode generator and stepper used during training and evaluation."""

    def __init__(self, n_rays: int = 16, fov: float = math.pi / 2, max_range: float = 20.0,
                 max_steps: int = 400, reward_cfg: RewardConfig = RewardConfig(),
                 near_goal_frac: float = 0.3):
        self.n_rays, self.fov, self.max_range = n_rays, fov, max_range
        self.near_goal_frac = near_goal_frac
        self.max_steps = max_steps
        self.reward_cfg = reward_cfg

    def sample_env(self, rng: np.random.Generator, obstacle: bool) -> Environment:
        if not obstacle:
            dist = rng.uniform(20.0, 80.0)
            ang = rng.uniform(-math.pi, math.pi)
            return Environment((), LocalPos(dist * math.cos(ang), dist * math.sin(ang)))
        dist = rng.uniform(60.0, 160.0)
        ang = rng.uniform(-math.pi, math.pi)
        u = np.array([math.cos(ang), math.sin(ang)])
        nrm = np.array([-u[1], u[0]])
        target = dist * u
        radius = rng.uniform(3.0, 7.0)
        if rng.random() < self.near_goal_frac:
            # target just past an obstacle surface: the last metres must be flown close to it
            gap = radius + rng.uniform(1.5, 4.0)
            side = rng.uniform(-math.pi / 2, math.pi / 2)
            c = target - gap * (math.cos(side) * u + math.sin(side) * nrm)
        else:
            frac = rng.uniform(0.3, 0.8)
            lateral = rng.uniform(-1.0, 1.0) * (radius + 4.0)
            c = frac * dist * u + lateral * nrm
            if np.linalg.norm(target - c) < radius + 4.0:
                c = (frac - 0.2) * dist * u + lateral * nrm
        return Environment((Circle(LocalPos(*c), radius),), LocalPos(*target))

    def reset(self, env: Environment, rng: np.random.Generator | None = None, yaw_jitter: float = 0.0):
        self.env = env
        yaw = bearing(env.start, env.target)
        if rng is not None and yaw_jitter:
            yaw += rng.uniform(-yaw_jitter, yaw_jitter)
        self.uav = UavState(env.start, math.atan2(math.sin(yaw), math.cos(yaw)), 0.0)
        self.tgt = TargetSpec(env.target, max((env.target - env.start).norm(), 1e-6))
        self.t = 0
        return self.observe()

    def observe(self, pos: LocalPos | None = None) -> np.ndarray:
        depth = ray_depth(self.uav, self.env, self.n_rays, self.fov, self.max_range).ranges
        rel = compute_rel(self.uav.pos if pos is None else pos, self.uav.yaw, self.tgt)
        dn, yn = normalize_rel(rel.d_rel, rel.yaw_rel, self.tgt.d_scale)
        return np.concatenate([depth, [float(dn), float(yn)]])

    def step(self, a_norm: np.ndarray):
        prev = self.uav
        self.uav = step_kinematics(prev, Action.from_normalized(a_norm), DT)
        self.t += 1
        r = reward(prev, self.uav, self.env, self.reward_cfg)
        collided = check_collision(self.uav, self.env).collided
        reached = (self.env.target - self.uav.pos).norm() <= self.env.goal_radius
        out = not Bounds(-400, 400, -400, 400).contains(self.uav.pos)
        terminal = collided or reached
        done = terminal or out or self.t >= self.max_steps
        obs = self.observe() if not reached else np.zeros(self.n_rays + 2)
        return obs, r, done, terminal, {"collided": collided, "reached": reached}


class EpisodeStats(NamedTuple):
    episode: int
    ret: float
    success: bool
    length: int


@dataclass
class TrainResult:
    policy: MlpPolicy
    curve: list[EpisodeStats]
    critics: CriticPair | None = None
    config: Td3Config | None = None


def train(cfg: Td3Config, task: NavTask | None = None, log_every: int = 0) -> TrainResult:
    """Run TD3 for ``cfg.total_steps`` environment steps; fully determined by ``cfg.seed``."""
    task = task or NavTask(cfg.n_rays, max_steps=cfg.max_episode_steps, reward_cfg=cfg.reward)
    rng = np.random.default_rng(cfg.seed)
    policy = MlpPolicy.build(cfg.n_rays, cfg.depth_hidden, cfg.trunk_hidden, seed=None)
    actor = policy.net.init(rng)
    q1 = build_critic(cfg.n_rays, cfg.depth_hidden, cfg.trunk_hidden, rng)
    q2 = build_critic(cfg.n_rays, cfg.depth_hidden, cfg.trunk_hidden, rng)
    critics = CriticPair.create(actor, q1, q2, cfg.learning_rate)
    actor_opt = Adam(actor.params, cfg.learning_rate)
    buf = ReplayBuffer(cfg.buffer_capacity, cfg.n_rays + 2, 2, seed=int(rng.integers(2**31)))
    env_rng = np.random.default_rng(int(rng.integers(2**31)))
    noise_rng = np.random.default_rng(int(rng.integers(2**31)))

    curve: list[EpisodeStats] = []
    split = int(cfg.curriculum_split * cfg.total_steps)
    obs = None
    ep_ret, ep_len, n_updates = 0.0, 0, 0
    for step in range(cfg.total_steps):
        if obs is None:
            env = task.sample_env(env_rng, obstacle=step >= split and env_rng.random() < 0.8)
            obs = task.reset(env, env_rng, yaw_jitter=math.pi / 4)
            ep_ret, ep_len = 0.0, 0
        if step < cfg.start_steps:
            a = noise_rng.uniform(-1.0, 1.0, size=2)
        else:
            a = actor_out(actor, obs[None, :])[0]
            a = np.clip(a + noise_rng.normal(0.0, cfg.exploration_sigma, size=2), -1.0, 1.0)
        obs2, r, done, terminal, info = task.step(a)
        buf.add(Transition(obs, a, r, obs2, terminal))
        ep_ret += r
        ep_len += 1
        obs = obs2
        if done:
            curve.append(EpisodeStats(len(curve), ep_ret, bool(info["reached"]), ep_len))
            obs = None
            if log_every and len(curve) % log_every == 0:
                recent = curve[-log_every:]
                log.info("step %d episodes %d return %.2f success %.2f", step, len(curve),
                         np.mean([e.ret for e in recent]), np.mean([e.success for e in recent]))
        if step >= cfg.update_after and len(buf) >= cfg.batch_size:
            n_updates += 1
            td3_update(buf.sample(cfg.batch_size), actor, critics, actor_opt, cfg, noise_rng, n_updates)
    return TrainResult(policy, curve, critics, cfg)


def evaluate(policy: MlpPolicy, task: NavTask, envs: list[Environment]) -> list[dict]:
    """Greedy rollouts (true position as input) on the given environments."""
    out = []
    for env in envs:
        obs = task.reset(env)
        ret, done, info, n = 0.0, False, {"reached": False, "collided": False}, 0
        while not done:
            a = policy.normalized_batch(obs)[0]
            obs, r, done, _, info = task.step(a)
            ret += r
            n += 1
        out.append({"return": ret, "success": bool(info["reached"]), "collided": bool(info["collided"]),
                    "length": n})
    return out


def write_curve(curve: list[EpisodeStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "return", "success", "length"])
        for e in curve:
            w.writerow([e.episode, f"{e.ret:.6f}", int(e.success), e.length])


def config_dict(cfg: Td3Config) -> dict:
    d = asdict(cfg)
    d["depth_hidden"] = list(cfg.depth_hidden)
    d["trunk_hidden"] = list(cfg.trunk_hidden)
    return d
