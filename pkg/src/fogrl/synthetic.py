"""Desk-scale synthetic corpora with known freeze onsets.

``generate_synthetic`` builds TI series directly: a noisy stationary level
that switches to a deterministic downward ramp ``ramp_lead_s`` seconds before
each onset, holds the ramp's end value during the freeze, then returns to the
stationary level.  ``synthetic_daphnet_trial`` produces raw 9-channel
recordings in the Daphnet layout for exercising ingest and transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .daphnet import SAMPLE_RATE_HZ, FogEpisode, RawTrial
from .dmd import TISeries


class InfeasibleSpecError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    n_subjects: int = 2
    episodes_per_subject: int = 10
    baseline: float = 1.0
    noise_sigma: float = 0.05
    ramp_slope: float = 0.05  # TI units lost per second approaching onset
    ramp_lead_s: float = 10.0
    freeze_s: float = 5.0
    spacing_s: float = 40.0
    lead_in_s: float = 20.0
    tail_s: float = 10.0
    stride_s: float = 0.25
    horizon_s: float = 15.0

    def validate(self):
        if self.n_subjects < 1 or self.episodes_per_subject < 1:
            raise InfeasibleSpecError("subject and episode counts must be positive")
        if self.ramp_slope <= 0:
            raise InfeasibleSpecError("ramp_slope must be positive to give a falling TI")
        if self.spacing_s <= self.ramp_lead_s + self.freeze_s:
            raise InfeasibleSpecError(
                f"spacing {self.spacing_s}s cannot fit a {self.ramp_lead_s}s ramp plus a {self.freeze_s}s freeze")
        if self.lead_in_s < self.ramp_lead_s:
            raise InfeasibleSpecError("lead_in_s must cover the first ramp")
        if self.stride_s <= 0 or self.noise_sigma < 0:
            raise InfeasibleSpecError("stride must be positive and noise non-negative")


def onset_times_ms(spec):
    return [int(round((spec.lead_in_s + k * spec.spacing_s) * 1000)) for k in range(spec.episodes_per_subject)]


def ti_formula(t_ms, onsets_ms, spec):
    """Noise-free TI at each timestamp (ramp, freeze plateau, or baseline)."""
    t = np.asarray(t_ms, dtype=np.float64)
    out = np.full(t.shape, spec.baseline)
    stationary = np.ones(t.shape, dtype=bool)
    lead_ms = spec.ramp_lead_s * 1000.0
    floor = spec.baseline - spec.ramp_slope * spec.ramp_lead_s
    for onset in onsets_ms:
        ramp = (t >= onset - lead_ms) & (t < onset)
        out[ramp] = spec.baseline - spec.ramp_slope * (t[ramp] - (onset - lead_ms)) / 1000.0
        frz = (t >= onset) & (t <= onset + spec.freeze_s * 1000.0)
        out[frz] = floor
        stationary &= ~(ramp | frz)
    return out, stationary


def generate_synthetic(spec=None, seed=0):
    spec = spec or SyntheticSpec()
    spec.validate()
    rng = np.random.default_rng(seed)
    onsets = onset_times_ms(spec)
    stride_ms = int(round(spec.stride_s * 1000))
    end_ms = onsets[-1] + int(round((spec.freeze_s + spec.tail_s) * 1000))
    t_ms = np.arange(0, end_ms + 1, stride_ms, dtype=np.int64)
    horizon_ms = int(round(spec.horizon_s * 1000))
    series, episodes, minutes = {}, [], {}
    for sid in range(1, spec.n_subjects + 1):
        tid = f"S{sid:02d}R01"
        ti, stationary = ti_formula(t_ms, onsets, spec)
        if spec.noise_sigma > 0:
            ti = ti + np.where(stationary, rng.normal(0.0, spec.noise_sigma, ti.shape), 0.0)
        series[tid] = TISeries(t_ms.copy(), ti, subject_id=sid, trial_id=tid)
        for k, onset in enumerate(onsets):
            start = max(int(t_ms[0]), onset - horizon_ms)
            episodes.append(FogEpisode(sid, tid, k, onset, onset + int(round(spec.freeze_s * 1000)),
                                       start, onset - int(t_ms[0]) < horizon_ms))
        minutes[sid] = (t_ms[-1] - t_ms[0]) / 60000.0
    return Corpus(series, episodes, minutes)


def synthetic_daphnet_trial(subject_id=1, run=1, onsets_s=(30.0, 70.0), freeze_s=5.0, duration_s=100.0,
                            ramp_lead_s=10.0, out_of_experiment_s=2.0, seed=0, rate=SAMPLE_RATE_HZ):
    """Gait-like 9-channel recording whose stride amplitude fades before each freeze."""
    rng = np.random.default_rng(seed)
    n = int(duration_s * rate)
    t_s = np.arange(n) / rate
    t_ms = np.round(t_s * 1000).astype(np.int64)
    amp = np.ones(n)
    ann = np.ones(n, dtype=np.int8)
    for onset in onsets_s:
        ramp = (t_s >= onset - ramp_lead_s) & (t_s < onset)
        amp[ramp] = 1.0 - 0.8 * (t_s[ramp] - (onset - ramp_lead_s)) / ramp_lead_s
        frz = (t_s >= onset) & (t_s < onset + freeze_s)
        amp[frz] = 0.2
        ann[frz] = 2
    ann[t_s < out_of_experiment_s] = 0
    ann[t_s >= duration_s - out_of_experiment_s] = 0
    gait = np.sin(2 * np.pi * 1.0 * t_s) + 0.4 * np.sin(2 * np.pi * 2.0 * t_s + 0.3)
    channels = np.empty((n, 9))
    gravity = (0.0, 1000.0, 0.0)
    for c in range(9):
        scale = 300.0 * (1.0 - 0.2 * (c // 3))
        channels[:, c] = gravity[c % 3] + scale * amp * np.roll(gait, 3 * c) + rng.normal(0, 15.0, n)
    channels = np.round(channels)
    return RawTrial(subject_id, f"S{subject_id:02d}R{run:02d}", t_ms, channels, ann, rate)


def write_daphnet_text(trial, path):
    """Write a trial in the raw whitespace-separated Daphnet layout."""
    with open(path, "w") as fh:
        for t, ch, a in zip(trial.t_ms.tolist(), trial.channels.astype(np.int64).tolist(), trial.annotation.tolist()):
            fh.write(" ".join(map(str, [t, *ch, a])) + "\n")
