"""Exact dynamic mode decomposition and the Triple Index (TI) signal.

For a window of acceleration samples the channels are delay-embedded into a
snapshot matrix, decomposed with exact DMD, and reduced to one scalar::

    a  = max_k |alpha_k|          (largest mode amplitude)
    m  = mean_k ||phi_k||         (mean mode norm, modes left unnormalised)
    TI = m * a
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_ENERGY_SLACK = 1e-12


class DegenerateInputError(ValueError):
    """Snapshot data has no energy (rank 0)."""


@dataclass
class DmdResult:
    eigenvalues: np.ndarray
    modes: np.ndarray  # (dim, r), columns are modes
    amplitudes: np.ndarray
    rank: int
    singular_values: np.ndarray = field(repr=False, default=None)

    def reconstruct(self, n_steps):
        """Predicted snapshots ``Phi diag(lambda)^k alpha`` for k = 0..n_steps-1."""
        k = np.arange(n_steps)
        dyn = self.amplitudes[:, None] * self.eigenvalues[:, None] ** k[None, :]
        return self.modes @ dyn


@dataclass(frozen=True)
class TIValue:
    ti: float
    a: float
    m: float
    t_ms: int | None = None


@dataclass(eq=False)
class TISeries:
    t_ms: np.ndarray  # int64, strictly increasing
    ti: np.ndarray
    subject_id: int = 0
    trial_id: str = ""
    a: np.ndarray | None = None
    m: np.ndarray | None = None

    def __len__(self):
        return self.t_ms.shape[0]


def delay_embed(samples, delay):
    """Stack ``delay`` consecutive samples into each snapshot column.

    ``samples`` is (n,) or (n, c); the result is (delay*c, n-delay+1) with
    column k = [x_k, x_{k+1}, ..., x_{k+delay-1}] flattened time-major.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, c = x.shape
    if delay < 1 or n - delay + 1 < 1:
        raise ValueError(f"cannot delay-embed {n} samples with depth {delay}")
    win = sliding_window_view(x, delay, axis=0)  # (n-d+1, c, d)
    return np.ascontiguousarray(win.transpose(0, 2, 1).reshape(n - delay + 1, delay * c).T)


def _truncation_rank(s, energy_threshold):
    energy = s * s
    total = energy.sum()
    if not total > 0.0:
        raise DegenerateInputError("snapshot matrix is identically zero")
    cum = np.cumsum(energy) / total
    r = int(np.searchsorted(cum, energy_threshold - _ENERGY_SLACK)) + 1
    return min(r, int(np.count_nonzero(s > 0.0)))


def compute_dmd(snapshots, energy_threshold=0.99):
    snapshots = np.asarray(snapshots)
    if snapshots.ndim != 2 or snapshots.shape[1] < 2:
        raise ValueError("need a 2-D snapshot matrix with at least two columns")
    if not 0.0 < energy_threshold <= 1.0:
        raise ValueError("energy_threshold must lie in (0, 1]")
    if not np.isfinite(snapshots).all():
        raise ValueError("snapshot matrix contains non-finite entries")
    X = snapshots[:, :-1]
    Xp = snapshots[:, 1:]
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    r = _truncation_rank(s, energy_threshold)
    Ur = U[:, :r]
    Vr = Vh[:r].conj().T
    inv_s = 1.0 / s[:r]
    XpV = (Xp @ Vr) * inv_s[None, :]
    atilde = Ur.conj().T @ XpV
    eigenvalues, W = np.linalg.eig(atilde)
    modes = XpV @ W
    amplitudes = np.linalg.lstsq(modes, snapshots[:, 0].astype(modes.dtype), rcond=None)[0]
    return DmdResult(eigenvalues, modes, amplitudes, r, s)


def triple_index(dmd):
    if dmd.rank < 1:
        raise ValueError("DMD result has no modes")
    a = float(np.max(np.abs(dmd.amplitudes)))
    m = float(np.mean(np.linalg.norm(dmd.modes, axis=0)))
    return TIValue(ti=m * a, a=a, m=m)


def window_ti(window, delay=10, energy_threshold=0.99):
    """TI of one (n, c) window; zero for a window without energy."""
    try:
        return triple_index(compute_dmd(delay_embed(window, delay), energy_threshold))
    except DegenerateInputError:
        return TIValue(0.0, 0.0, 0.0)


def window_starts(n_samples, window, stride):
    if n_samples < window:
        return np.empty(0, dtype=np.int64)
    return np.arange(0, n_samples - window + 1, stride, dtype=np.int64)


def ti_series(trial, window_s=2.0, stride_s=0.25, delay=10, channels=None,
              energy_threshold=0.99, workers=1):
    """Sliding-window TI over a raw trial, stamped at each window's last sample.

    Windows touching any out-of-experiment sample are skipped.  ``channels``
    selects a subset of the nine columns (default: all).
    """
    rate = trial.sample_rate_hz
    win = int(round(window_s * rate))
    step = int(round(stride_s * rate))
    if step < 1:
        raise ValueError("stride must cover at least one sample")
    if win - delay + 1 < 2:
        raise ValueError(f"window of {win} samples too short for delay depth {delay}")
    data = trial.channels if channels is None else trial.channels[:, list(channels)]
    outside = np.concatenate(([0], np.cumsum(trial.annotation == 0)))
    starts = [s for s in window_starts(len(trial), win, step).tolist() if outside[s + win] == outside[s]]

    def one(s):
        return window_ti(data[s:s + win], delay, energy_threshold)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(one, starts))
    else:
        values = [one(s) for s in starts]
    ends = np.array([s + win - 1 for s in starts], dtype=np.int64)
    return TISeries(
        t_ms=trial.t_ms[ends] if ends.size else np.empty(0, dtype=np.int64),
        ti=np.array([v.ti for v in values], dtype=np.float64),
        subject_id=trial.subject_id,
        trial_id=trial.trial_id,
        a=np.array([v.a for v in values], dtype=np.float64),
        m=np.array([v.m for v in values], dtype=np.float64),
    )


def write_ti_series(series, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ms", "ti"])
        for t, v in zip(series.t_ms.tolist(), series.ti.tolist()):
            w.writerow([t, repr(v)])


def read_ti_series(path, subject_id=0, trial_id=None):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["t_ms", "ti"]:
            raise ValueError(f"{path}: expected header t_ms,ti")
        rows = [r for r in reader if r]
    t = np.array([int(r[0]) for r in rows], dtype=np.int64)
    ti = np.array([float(r[1]) for r in rows], dtype=np.float64)
    if trial_id is None:
        trial_id = path.name.split(".")[0]
    return TISeries(t, ti, subject_id=subject_id, trial_id=trial_id)
