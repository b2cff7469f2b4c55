"""Wait/place decision environment over one pre-freeze segment.

Each episode starts some seconds before a known freeze onset.  At every tick
the agent either waits (time advances by ``step_s``) or places its single
warning flag, which ends the episode.  Rewards depend only on the action, the
remaining time to onset ``tau`` and the reward scheme.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .features import extract_state, extract_state_ablated, window_bounds
from .replay import PLACE, WAIT


class SkipEpisode(Exception):
    """Episode has no usable TI history before its onset."""


class EpisodeDoneError(RuntimeError):
    pass


class Terminal(str, enum.Enum):
    PLACED = "Placed"
    REACHED_ONSET = "ReachedOnset"
    SEGMENT_END = "SegmentEnd"


@dataclass
class EnvConfig:
    horizon_s: float = 15.0
    accurate_lo_s: float = 6.0
    accurate_hi_s: float = 15.0
    reward_accurate: float = 150.0
    reward_early: float = -40.0
    reward_late: float = -60.0
    reward_failure: float = -200.0
    wait_bonus: float = 0.1
    scheme: str = "shaped"  # shaped | simple
    simple_accurate: float = 100.0
    reward_grade: str = "flat"  # flat | linear
    step_s: float = 0.25
    feature_window_s: float = 10.0
    feature_mode: str = "six"  # six | ablated
    ablated_n: int = 6
    zscore_sigma: str = "window"  # window | trial

    def __post_init__(self):
        if self.scheme not in ("shaped", "simple"):
            raise ValueError(f"unknown reward scheme {self.scheme!r}")
        if self.reward_grade not in ("flat", "linear"):
            raise ValueError(f"unknown reward_grade {self.reward_grade!r}")
        if self.feature_mode not in ("six", "ablated"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")
        if self.zscore_sigma not in ("window", "trial"):
            raise ValueError(f"unknown zscore_sigma {self.zscore_sigma!r}")
        if not 0 < self.accurate_lo_s < self.accurate_hi_s:
            raise ValueError("need 0 < accurate_lo_s < accurate_hi_s")
        if self.scheme == "shaped" and self.accurate_hi_s > self.horizon_s:
            raise ValueError("accurate_hi_s may not exceed horizon_s")
        if self.step_s <= 0:
            raise ValueError("step_s must be positive")

    @property
    def state_dim(self):
        return 6 if self.feature_mode == "six" else self.ablated_n

    @property
    def accurate_reward(self):
        return self.simple_accurate if self.scheme == "simple" else self.reward_accurate

    @property
    def wait_reward(self):
        return 0.0 if self.scheme == "simple" else self.wait_bonus

    @property
    def step_ms(self):
        return int(round(self.step_s * 1000))


def place_reward(tau_s, config):
    """Reward for placing the flag ``tau_s`` seconds before onset.

    The accurate band is closed on both ends.  A flag at or after onset
    (``tau_s <= 0``, only reachable in evaluation rollouts) scores as failure.
    """
    lo, hi = config.accurate_lo_s, config.accurate_hi_s
    if tau_s <= 0.0:
        return config.reward_failure
    if tau_s < lo:
        return config.reward_late
    if tau_s > hi:
        return config.reward_early
    if config.reward_grade == "linear":
        return config.accurate_reward * (1.0 - 0.5 * (tau_s - lo) / (hi - lo))
    return config.accurate_reward


def ti_history_start(t_ms, onset_ms, step_ms=None):
    """Earliest TI timestamp of the gap-free run ending at or before ``onset_ms``.

    Returns None when no TI sample precedes the onset.  A gap wider than twice
    the typical spacing (or ``2*step_ms``) breaks the run.
    """
    hi = int(np.searchsorted(t_ms, onset_ms, side="right"))
    if hi == 0:
        return None
    if hi == 1:
        return int(t_ms[0])
    d = np.diff(t_ms[:hi])
    spacing = float(np.median(d)) if step_ms is None else float(step_ms)
    breaks = np.flatnonzero(d > 2.0 * spacing)
    return int(t_ms[breaks[-1] + 1]) if breaks.size else int(t_ms[0])


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class FogEnv:
    """Environment bound to the TI series of one trial.

    With ``extend_past_onset`` the episode continues through the freeze
    until ``episode.end_ms`` so that flags placed inside the freeze can be
    observed (evaluation only); waiting past onset earns nothing.
    """

    def __init__(self, series, config=None, extend_past_onset=False):
        self.series = series
        self.config = config or EnvConfig()
        self.extend_past_onset = extend_past_onset
        self.trial_sigma = float(np.std(series.ti)) if len(series) else 0.0
        self.episode = None
        self.now_ms = None
        self.done = True
        self.trace = []

    def available_history_s(self, episode):
        start = ti_history_start(self.series.t_ms, episode.onset_ms)
        if start is None:
            return 0.0
        return (episode.onset_ms - start) / 1000.0

    def reset(self, episode, rng, offset_s=None):
        """Start ``offset_s`` seconds before onset (drawn from the accurate band when None)."""
        cfg = self.config
        available = self.available_history_s(episode)
        if available <= 0.0:
            raise SkipEpisode(episode.episode_id)
        short = episode.short_history or available < cfg.horizon_s
        if offset_s is None:
            offset_s = available if short else rng.uniform(cfg.accurate_lo_s, cfg.horizon_s)
        offset_s = min(offset_s, available)
        self.episode = episode
        self.now_ms = episode.onset_ms - int(round(offset_s * 1000))
        self.done = False
        self.trace = []
        return self.observe()

    @property
    def tau_s(self):
        return (self.episode.onset_ms - self.now_ms) / 1000.0

    def observe(self):
        cfg = self.config
        t, ti = self.series.t_ms, self.series.ti
        onset = max(self.episode.onset_ms, self.now_ms)
        lo, hi = window_bounds(t, self.now_ms, cfg.feature_window_s)
        if hi == 0:
            raise SkipEpisode(self.episode.episode_id)
        if lo >= hi:
            lo = hi - 1
        if cfg.feature_mode == "ablated":
            return extract_state_ablated(t[lo:hi], ti[lo:hi], onset, self.now_ms, cfg.ablated_n)
        sigma_f = self.trial_sigma if cfg.zscore_sigma == "trial" else None
        return extract_state(t[lo:hi], ti[lo:hi], onset, self.now_ms, sigma_f).to_array()

    def step(self, action):
        if self.done:
            raise EpisodeDoneError("step() called on a finished episode")
        cfg = self.config
        tau = self.tau_s
        t_act = self.now_ms
        info = {"tau_at_action_s": tau}
        if action == PLACE:
            reward = place_reward(tau, cfg)
            self.done = True
            info["terminal_kind"] = Terminal.PLACED
            info["misplaced"] = tau <= 0.0
        elif action == WAIT:
            self.now_ms += cfg.step_ms
            if self.extend_past_onset:
                if self.now_ms >= self.episode.end_ms:
                    reward = cfg.reward_failure
                    self.done = True
                    info["terminal_kind"] = Terminal.SEGMENT_END
                elif self.now_ms >= self.episode.onset_ms:
                    reward = 0.0
                else:
                    reward = cfg.wait_reward
            elif self.now_ms >= self.episode.onset_ms:
                reward = cfg.reward_failure
                self.done = True
                info["terminal_kind"] = Terminal.REACHED_ONSET
            else:
                reward = cfg.wait_reward
        else:
            raise ValueError(f"unknown action {action!r}")
        self.trace.append((t_act, tau, int(action), float(reward), self.done))
        return StepOutcome(self.observe(), float(reward), self.done, info)


def episode_return(trace):
    """Sum of rewards over a trace of ``(t_ms, tau_s, action, reward, done)`` rows or bare rewards."""
    total = 0.0
    for row in trace:
        total += row[3] if isinstance(row, tuple) else row
    return total


def write_trace(trace, path, append=False):
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append:
            w.writerow(["t_ms", "tau_s", "action", "reward", "done"])
        for t, tau, a, r, d in trace:
            w.writerow([t, repr(tau), a, repr(r), int(d)])
