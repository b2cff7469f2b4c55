"""Proportional prioritized experience replay over a sum tree."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _accel

WAIT, PLACE = 0, 1

_MAGIC = b"FOGRLPER"
_VERSION = 1
_HEADER = struct.Struct("<8sIIQQQdd")


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


@dataclass
class PerConfig:
    capacity: int = 50_000
    alpha: float = 0.6
    beta0: float = 0.4
    beta_increment: float | None = None  # None: derived from the run length
    epsilon_priority: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.beta0 <= 1.0:
            raise ValueError("beta0 must lie in (0, 1]")
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.epsilon_priority < 0:
            raise ValueError("epsilon_priority must be non-negative")


def beta_schedule(n_steps, beta0=0.4, beta_increment=1e-5):
    return min(1.0, beta0 + beta_increment * n_steps)


class SumTree:
    """Array-backed binary tree keeping subtree sums and maxima of leaf priorities.

    Leaves sit at ``capacity .. 2*capacity-1`` (capacity rounded up to a power
    of two); node ``i`` has children ``2i`` and ``2i+1``; the root is node 1.
    """

    def __init__(self, size):
        self.capacity = 1 << max(0, math.ceil(math.log2(max(1, size))))
        self.sums = np.zeros(2 * self.capacity)
        self.maxes = np.zeros(2 * self.capacity)

    @property
    def total(self):
        return float(self.sums[1])

    @property
    def max_leaf(self):
        return float(self.maxes[1])

    def leaves(self):
        return self.sums[self.capacity:]

    def set(self, leaves, values):
        _accel.tree_set(self.sums, self.maxes, self.capacity,
                        np.ascontiguousarray(leaves, dtype=np.int64),
                        np.ascontiguousarray(values, dtype=np.float64))

    def find(self, targets):
        return _accel.tree_retrieve(self.sums, self.capacity,
                                    np.ascontiguousarray(targets, dtype=np.float64))


class PrioritizedReplay:
    """Ring buffer of transitions sampled in proportion to stored priority.

    Priorities are stored already raised to ``alpha``, so the tree mass is the
    sampling distribution directly.
    """

    def __init__(self, state_dim, config=None):
        self.config = config or PerConfig()
        self.state_dim = state_dim
        cap = self.config.capacity
        self.capacity = cap
        self.tree = SumTree(cap)
        self.states = np.zeros((cap, state_dim))
        self.next_states = np.zeros((cap, state_dim))
        self.actions = np.zeros(cap, dtype=np.int64)
        self.rewards = np.zeros(cap)
        self.dones = np.zeros(cap, dtype=bool)
        self.size = 0
        self.pos = 0

    def __len__(self):
        return self.size

    def add(self, t):
        if t.action not in (WAIT, PLACE):
            raise ValueError(f"action must be 0 or 1, got {t.action!r}")
        if not math.isfinite(t.reward):
            raise ValueError("reward must be finite")
        i = self.pos
        self.states[i] = t.state
        self.next_states[i] = t.next_state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.dones[i] = t.done
        priority = self.tree.max_leaf if self.size else 1.0
        self.tree.set(np.array([i]), np.array([priority]))
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, beta, rng):
        """Stratified proportional draw.

        Returns ``(batch, indices, weights)``; weights are ``(N P(i))^-beta``
        rescaled so the largest in the batch is 1.
        """
        if self.size < batch_size:
            raise InsufficientSamplesError(f"buffer holds {self.size} < {batch_size} transitions")
        total = self.tree.total
        seg = total / batch_size
        targets = (np.arange(batch_size) + rng.random(batch_size)) * seg
        np.minimum(targets, np.nextafter(total, 0.0), out=targets)
        idx = self.tree.find(targets)
        idx = np.minimum(idx, self.size - 1)
        probs = self.tree.sums[self.tree.capacity + idx] / total
        weights = (self.size * probs) ** (-beta)
        weights /= weights.max()
        batch = Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                      self.next_states[idx], self.dones[idx])
        return batch, idx, weights

    def priority_of(self, td_errors):
        return (np.abs(np.asarray(td_errors, dtype=np.float64)) + self.config.epsilon_priority) ** self.config.alpha

    def update_priorities(self, indices, td_errors):
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.size):
            raise IndexError(f"priority index out of range [0, {self.size})")
        self.tree.set(indices, self.priority_of(td_errors))

    def priorities(self):
        return self.tree.leaves()[: self.size].copy()

    # -- snapshot -----------------------------------------------------------

    def save(self, path):
        c = self.config
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, self.state_dim, self.capacity,
                                  self.size, self.pos, c.alpha, c.epsilon_priority))
            fh.write(struct.pack("<dd", c.beta0, -1.0 if c.beta_increment is None else c.beta_increment))
            for arr, dt in ((self.states, "<f8"), (self.next_states, "<f8"), (self.actions, "<i8"),
                            (self.rewards, "<f8"), (self.dones, "<u1"), (self.tree.leaves(), "<f8")):
                fh.write(np.ascontiguousarray(arr[: self.capacity], dtype=dt).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        magic, version, dim, cap, size, pos, alpha, eps = _HEADER.unpack_from(raw, 0)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a replay snapshot")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        off = _HEADER.size
        beta0, beta_inc = struct.unpack_from("<dd", raw, off)
        off += 16
        buf = cls(dim, PerConfig(cap, alpha, beta0, None if beta_inc < 0 else beta_inc, eps))

        def take(dt, shape):
            nonlocal off
            n = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype=dt, count=n, offset=off).reshape(shape)
            off += n * np.dtype(dt).itemsize
            return arr

        buf.states[:] = take("<f8", (cap, dim))
        buf.next_states[:] = take("<f8", (cap, dim))
        buf.actions[:] = take("<i8", (cap,))
        buf.rewards[:] = take("<f8", (cap,))
        buf.dones[:] = take("<u1", (cap,)).astype(bool)
        leaves = take("<f8", (cap,))
        buf.tree.set(np.arange(cap), leaves)
        buf.size, buf.pos = int(size), int(pos)
        return buf
