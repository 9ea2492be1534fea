"""Two-branch dense network with hand-written backprop, plus Adam.

The depth scan goes through its own stack of layers; the resulting features
are concatenated with a small vector of physical inputs (and, for critics,
the action) and passed through the trunk.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class BranchNet:
    depth_sizes: list[int]   # e.g. [16, 32, 16]; first entry is the ray count
    trunk_sizes: list[int]   # e.g. [18, 64, 64, 2]; first entry = features + extras
    hidden_act: str = "relu"
    out_act: str = "tanh"
    params: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.hidden_act not in ACTIVATIONS or self.out_act not in ACTIVATIONS:
            raise ValueError("unknown activation")
        if len(self.depth_sizes) < 1 or len(self.trunk_sizes) < 2:
            raise ValueError("need at least an input size per branch and one trunk layer")
        if self.trunk_sizes[0] <= self.depth_sizes[-1]:
            raise ValueError("trunk input must include depth features plus extra inputs")
        shapes = self.param_shapes()
        if not self.params:
            self.params = [np.zeros(s) for s in shapes]
        if [p.shape for p in self.params] != shapes:
            raise ValueError("parameter shapes do not match layer sizes")

    @property
    def n_extra(self) -> int:
        return self.trunk_sizes[0] - self.depth_sizes[-1]

    @property
    def n_depth_layers(self) -> int:
        return len(self.depth_sizes) - 1

    def param_shapes(self) -> list[tuple[int, ...]]:
        shapes = []
        for sizes in (self.depth_sizes, self.trunk_sizes):
            for i, o in zip(sizes[:-1], sizes[1:]):
                shapes += [(i, o), (o,)]
        return shapes

    def init(self, rng: np.random.Generator) -> "BranchNet":
        """Uniform fan-in init; the last layer is scaled down so outputs start near zero."""
        new = []
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            W = self.params[2 * k]
            bound = 1.0 / np.sqrt(W.shape[0])
            if k == n_layers - 1:
                bound = 3e-3
            new += [rng.uniform(-bound, bound, W.shape), np.zeros(W.shape[1])]
        self.params = new
        return self

    def copy(self) -> "BranchNet":
        return BranchNet(list(self.depth_sizes), list(self.trunk_sizes), self.hidden_act, self.out_act,
                         [p.copy() for p in self.params])

    def _layers(self):
        nd = self.n_depth_layers
        W = self.params[0::2]
        b = self.params[1::2]
        return list(zip(W[:nd], b[:nd])), list(zip(W[nd:], b[nd:]))

    def forward(self, depth: np.ndarray, extra: np.ndarray, keep: bool = False):
        depth = np.atleast_2d(depth)
        extra = np.atleast_2d(extra)
        if depth.shape[1] != self.depth_sizes[0] or extra.shape[1] != self.n_extra:
            raise DimensionMismatch(
                f"expected depth {self.depth_sizes[0]} + extra {self.n_extra}, "
                f"got {depth.shape[1]} + {extra.shape[1]}"
            )
        dl, tl = self._layers()
        cache = []
        h = depth
        for W, b in dl:
            z = h @ W + b
            a = _act(self.hidden_act, z)
            cache.append((h, z, a, self.hidden_act))
            h = a
        h = np.concatenate([h, extra], axis=1)
        for k, (W, b) in enumerate(tl):
            name = self.out_act if k == len(tl) - 1 else self.hidden_act
            z = h @ W + b
            a = _act(name, z)
            cache.append((h, z, a, name))
            h = a
        return (h, cache) if keep else h

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of ``sum(grad_out * out)`` w.r.t. params and the extra input."""
        nd = self.n_depth_layers
        grads: list[np.ndarray] = [None] * len(self.params)
        g = grad_out
        grad_extra = None
        for k in range(len(cache) - 1, -1, -1):
            h_in, z, a, name = cache[k]
            dz = g * _act_grad(name, z, a)
            grads[2 * k] = h_in.T @ dz
            grads[2 * k + 1] = dz.sum(axis=0)
            g = dz @ self.params[2 * k].T
            if k == nd:
                n_feat = self.depth_sizes[-1]
                grad_extra = g[:, n_feat:]
                g = g[:, :n_feat]
        return grads, grad_extra


class DimensionMismatch(ValueError):
    pass


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """In-place descent step on ``params``."""
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
