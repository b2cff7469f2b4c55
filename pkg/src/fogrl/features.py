"""Agent observations built from a trailing window of TI samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel

SIGMA_FLOOR = 1e-8
STATE_FIELDS = ("tau_s", "mean", "std", "slope", "spike", "zscore")


@dataclass(frozen=True)
class StateVector:
    tau_s: float
    mean: float
    std: float
    slope: float
    spike: float
    zscore: float

    def to_array(self):
        return np.array([self.tau_s, self.mean, self.std, self.slope, self.spike, self.zscore])


def window_bounds(t_ms, now_ms, window_s=10.0):
    """Index range of samples with ``now - window < t <= now``."""
    lo = int(np.searchsorted(t_ms, now_ms - int(round(window_s * 1000)), side="right"))
    hi = int(np.searchsorted(t_ms, now_ms, side="right"))
    return lo, hi


def _check(t_ms, ti, onset_ms, now_ms):
    if len(ti) == 0:
        raise ValueError("empty TI window")
    if now_ms > onset_ms:
        raise ValueError(f"now ({now_ms} ms) is past the onset ({onset_ms} ms)")


def extract_state(t_ms, ti, onset_ms, now_ms, sigma_f=None):
    """Six-parameter state from a window of TI samples.

    ``sigma_f`` overrides the z-score denominator (e.g. a whole-trial sigma);
    by default the window's own population sigma is used, floored at 1e-8.
    """
    _check(t_ms, ti, onset_ms, now_ms)
    ti = np.asarray(ti, dtype=np.float64)
    t_s = (np.asarray(t_ms, dtype=np.float64) - float(t_ms[0])) / 1000.0
    mean, std, slope, mx = _accel.window_stats(t_s, ti)
    spike = abs(mx - mean)
    denom = max(std if sigma_f is None else float(sigma_f), SIGMA_FLOOR)
    return StateVector(
        tau_s=(onset_ms - now_ms) / 1000.0,
        mean=float(mean),
        std=float(std),
        slope=float(slope),
        spike=float(spike),
        zscore=float((mx - mean) / denom),
    )


def extract_state_ablated(t_ms, ti, onset_ms, now_ms, n=6):
    """Last ``n`` raw TI samples, min-max scaled over the whole window.

    A flat window maps to 0.5 everywhere.  Windows shorter than ``n`` are
    left-padded with their first sample so the output length is always ``n``.
    """
    _check(t_ms, ti, onset_ms, now_ms)
    ti = np.asarray(ti, dtype=np.float64)
    lo, hi = ti.min(), ti.max()
    tail = ti[-n:]
    if tail.shape[0] < n:
        tail = np.concatenate((np.full(n - tail.shape[0], ti[0]), tail))
    if hi - lo <= 0.0:
        return np.full(n, 0.5)
    return (tail - lo) / (hi - lo)


class StateScaler:
    """Input scaling for the Q-network.

    ``running`` mode divides tau by the environment horizon and z-normalises
    the remaining features with Welford statistics that stop updating after
    ``warmup`` observations.  ``none`` passes states through unchanged.
    """

    def __init__(self, dim, mode="running", horizon_s=15.0, warmup=500, tau_index=0):
        if mode not in ("none", "running"):
            raise ValueError(f"unknown state_norm {mode!r}")
        self.dim = dim
        self.mode = mode
        self.horizon_s = float(horizon_s)
        self.warmup = int(warmup)
        self.tau_index = tau_index
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def frozen(self):
        return self.count >= self.warmup

    def update(self, x):
        if self.mode == "none" or self.frozen:
            return
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def std(self):
        if self.count < 2:
            return np.ones(self.dim)
        s = np.sqrt(self.m2 / self.count)
        return np.where(s > 1e-8, s, 1.0)

    def __call__(self, x):
        if self.mode == "none":
            return np.asarray(x, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        out = (x - self.mean) / self.std()
        if self.tau_index is not None:
            out[..., self.tau_index] = x[..., self.tau_index] / self.horizon_s
        return out

    def state_dict(self):
        return {"dim": self.dim, "mode": self.mode, "horizon_s": self.horizon_s,
                "warmup": self.warmup, "tau_index": self.tau_index, "count": self.count,
                "mean": self.mean.tolist(), "m2": self.m2.tolist()}

    @classmethod
    def from_state_dict(cls, d):
        obj = cls(d["dim"], d["mode"], d["horizon_s"], d["warmup"], d["tau_index"])
        obj.count = d["count"]
        obj.mean = np.array(d["mean"], dtype=np.float64)
        obj.m2 = np.array(d["m2"], dtype=np.float64)
        return obj
