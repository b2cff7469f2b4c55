"""Fully connected Q-network in plain numpy, with Adam and the DDQN update."""

from __future__ import annotations

import hashlib
import struct

import numpy as np

HIDDEN = (256, 256, 256, 256)
N_ACTIONS = 2

_MAGIC = b"FOGRLQNT"
_VERSION = 1


class NonFiniteLossError(FloatingPointError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(f"{message}: {self.diagnostics}")


class QNetwork:
    """ReLU MLP mapping a state to one Q-value per action; output layer is linear."""

    def __init__(self, input_dim, hidden=HIDDEN, n_actions=N_ACTIONS, seed=0):
        self.sizes = (int(input_dim), *map(int, hidden), int(n_actions))
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)  # He-uniform
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self):
        return self.sizes[0]

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"state dimension {x.shape[-1]} != network input {self.input_dim}")
        h = x[None, :] if single else x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                np.maximum(h, 0.0, out=h)
        return h[0] if single else h

    def _forward_cached(self, x):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts

    def loss_and_grads(self, states, actions, targets, weights):
        """IS-weighted MSE ``(1/B) sum w_j (y_j - Q(s_j, a_j))^2`` and its gradient.

        Only the taken action's output receives gradient.  Returns
        ``(loss, td_errors, grads)`` with ``td = y - Q`` and grads ordered
        like :meth:`params`.
        """
        states = np.asarray(states, dtype=np.float64)
        if states.shape[-1] != self.input_dim:
            raise ValueError(f"state dimension {states.shape[-1]} != network input {self.input_dim}")
        n = states.shape[0]
        rows = np.arange(n)
        acts = self._forward_cached(states)
        q_sa = acts[-1][rows, actions]
        td = targets - q_sa
        loss = float(np.mean(weights * td * td))
        delta = np.zeros_like(acts[-1])
        delta[rows, actions] = -2.0 * weights * td / n
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return loss, td, grads

    def copy_from(self, other):
        if other.sizes != self.sizes:
            raise ValueError("network shapes differ")
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def clone(self):
        net = QNetwork.__new__(QNetwork)
        net.sizes = self.sizes
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def digest(self):
        h = hashlib.sha256()
        for p in self.params():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()

    def all_finite(self):
        return all(np.isfinite(p).all() for p in self.params())


def sync_target(online, target):
    """Hard copy of the online parameters into the target network."""
    target.copy_from(online)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        lr_t = self.lr * np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr_t * m / (np.sqrt(v) + self.eps)


def clip_by_global_norm(grads, max_norm):
    norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm


def greedy_actions(q):
    """Argmax over actions; ties resolve to the lowest index (Wait)."""
    return np.argmax(q, axis=-1)


def ddqn_target(rewards, next_states, dones, online, target, gamma=0.99):
    """``y = r`` on terminal steps, else ``r + gamma * Q_target(s', argmax_a Q_online(s', a))``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    a_star = greedy_actions(online.forward(next_states))
    q_next = target.forward(next_states)[np.arange(len(rewards)), a_star]
    return np.where(dones, rewards, rewards + gamma * q_next)


def train_step(online, target, adam, batch, is_weights, gamma=0.99, clip_norm=10.0, states=None,
               next_states=None):
    """One DDQN update on a replay batch.

    ``states`` / ``next_states`` may be passed pre-scaled; otherwise the
    batch's raw arrays are used.  Returns ``(td_errors, loss)``.
    """
    s = batch.states if states is None else states
    s2 = batch.next_states if next_states is None else next_states
    y = ddqn_target(batch.rewards, s2, batch.dones, online, target, gamma)
    loss, td, grads = online.loss_and_grads(s, batch.actions, y, is_weights)
    if not np.isfinite(loss):
        raise NonFiniteLossError("non-finite loss", {
            "loss": loss,
            "max_abs_target": float(np.nanmax(np.abs(y))),
            "max_abs_td": float(np.nanmax(np.abs(td))),
            "adam_step": adam.t,
        })
    grads, _ = clip_by_global_norm(grads, clip_norm)
    adam.step(online.params(), grads)
    if not online.all_finite():
        raise NonFiniteLossError("non-finite parameters after update", {"adam_step": adam.t})
    return td, loss


def save_checkpoint(net, path):
    """Versioned header, layer shapes, then every W and b as little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sII", _MAGIC, _VERSION, len(net.weights)))
        for w in net.weights:
            fh.write(struct.pack("<II", *w.shape))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path, expected_sizes=None):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n_layers = struct.unpack_from("<8sII", raw, 0)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a Q-network checkpoint")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    shapes = []
    for _ in range(n_layers):
        shapes.append(struct.unpack_from("<II", raw, off))
        off += 8
    sizes = (shapes[0][0], *(s[1] for s in shapes))
    if any(a[1] != b[0] for a, b in zip(shapes[:-1], shapes[1:])):
        raise ValueError(f"{path}: inconsistent layer shapes {shapes}")
    if expected_sizes is not None and tuple(expected_sizes) != sizes:
        raise ValueError(f"{path}: checkpoint shapes {sizes} != expected {tuple(expected_sizes)}")
    net = QNetwork.__new__(QNetwork)
    net.sizes = sizes
    net.weights, net.biases = [], []
    for r, c in shapes:
        net.weights.append(np.frombuffer(raw, "<f8", r * c, off).reshape(r, c).astype(np.float64))
        off += 8 * r * c
        net.biases.append(np.frombuffer(raw, "<f8", c, off).astype(np.float64))
        off += 8 * c
    if off != len(raw):
        raise ValueError(f"{path}: {len(raw) - off} trailing bytes")
    return net
