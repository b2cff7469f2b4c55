"""Training loop: epsilon-greedy DDQN with prioritized replay over pre-freeze episodes."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvConfig, FogEnv
from .features import StateScaler
from .qnet import Adam, NonFiniteLossError, QNetwork, greedy_actions, load_checkpoint, save_checkpoint, sync_target, train_step
from .replay import PerConfig, PrioritizedReplay, Transition, beta_schedule

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    total_episodes: int = 9000
    gamma: float = 0.99
    batch_size: int = 1024
    lr: float = 1e-3
    hidden: list = field(default_factory=lambda: [256, 256, 256, 256])
    epsilon_start: float = 1.0
    epsilon_min: float = 0.01
    epsilon_decay: float = 0.9995
    target_sync_steps: int = 1000
    clip_norm: float = 10.0
    sampler: str = "uniform"  # uniform | balanced
    state_norm: str = "running"  # none | running
    norm_warmup: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.epsilon_min <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if self.sampler not in ("uniform", "balanced"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.batch_size < 1 or self.total_episodes < 1:
            raise ValueError("batch_size and total_episodes must be positive")


def epsilon_after(episode, config):
    """Exploration rate once ``episode`` episodes have finished."""
    return max(config.epsilon_min, config.epsilon_start * config.epsilon_decay ** episode)


def auto_beta_increment(per, train, env):
    """Anneal beta to 1 over ~75% of the expected step count.

    The step estimate assumes an average episode runs from the middle of the
    start-offset range down to the accurate band's lower edge.
    """
    mid = 0.5 * (env.accurate_lo_s + env.horizon_s)
    steps_per_episode = max(1.0, (mid - env.accurate_lo_s) / env.step_s)
    return (1.0 - per.beta0) / (0.75 * train.total_episodes * steps_per_episode)


def select_action(net, state, epsilon, rng):
    if rng.random() < epsilon:
        return int(rng.integers(2))
    return int(greedy_actions(net.forward(state)))


def episode_sampler(pool, rng, strategy="uniform", visits=None):
    """Pick the next training episode; ``balanced`` weights by 1/(1+visits)."""
    if not pool:
        raise ValueError("empty episode pool")
    if strategy == "uniform" or visits is None:
        return pool[int(rng.integers(len(pool)))]
    if strategy != "balanced":
        raise ValueError(f"unknown sampler {strategy!r}")
    w = 1.0 / (1.0 + np.array([visits.get(e.episode_id, 0) for e in pool], dtype=np.float64))
    return pool[int(rng.choice(len(pool), p=w / w.sum()))]


def balanced_probabilities(visit_counts):
    w = 1.0 / (1.0 + np.asarray(visit_counts, dtype=np.float64))
    return w / w.sum()


@dataclass
class CurveRow:
    episode: int
    ret: float
    epsilon: float
    mean_abs_td: float
    best_avg_return: float
    steps: int


class Agent:
    """Greedy policy: a Q-network plus the state scaler it was trained with."""

    def __init__(self, net, scaler, env_config):
        self.net = net
        self.scaler = scaler
        self.env_config = env_config

    def q_values(self, obs):
        return self.net.forward(self.scaler(obs))

    def act(self, obs):
        return int(greedy_actions(self.q_values(obs)))

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.net, out / "qnet.bin")
        meta = {"version": 1, "scaler": self.scaler.state_dict(), "env": asdict(self.env_config)}
        (out / "agent.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, in_dir):
        d = Path(in_dir)
        meta = json.loads((d / "agent.json").read_text())
        env_cfg = EnvConfig(**meta["env"])
        net = load_checkpoint(d / "qnet.bin")
        if net.input_dim != env_cfg.state_dim:
            raise ValueError("checkpoint input size does not match the feature mode")
        return cls(net, StateScaler.from_state_dict(meta["scaler"]), env_cfg)


@dataclass
class TrainingResult:
    agent: Agent
    curve: list
    coverage: Counter
    n_steps: int
    sync_steps: list = field(default_factory=list)
    buffer_max_size: int = 0


def usable_episodes(pool, series):
    """Episodes whose trial has at least one TI sample before onset."""
    out = []
    for e in pool:
        s = series.get(e.trial_id)
        if s is not None and len(s) and FogEnv(s).available_history_s(e) > 0.0:
            out.append(e)
    return out


def run_training(pool, series, train=None, env_config=None, per=None, checkpoint_dir=None,
                 observer=None, on_episode=None):
    """Train one agent on ``pool`` (FogEpisodes) backed by ``series`` (trial_id -> TISeries).

    ``observer``, if given, is called after every environment step with a dict
    of loop internals (used by tests to check invariants).  ``on_episode`` is
    called as ``on_episode(episode, env, states)`` after every episode with the
    raw states the agent observed.
    """
    train = train or TrainConfig()
    env_config = env_config or EnvConfig()
    per = per or PerConfig()
    if per.beta_increment is None:
        per = PerConfig(per.capacity, per.alpha, per.beta0, auto_beta_increment(per, train, env_config),
                        per.epsilon_priority)
    pool = usable_episodes(list(pool), series)
    if not pool:
        raise ValueError("episode pool is empty (or has no TI history)")
    rng = np.random.default_rng(train.seed)
    dim = env_config.state_dim
    online = QNetwork(dim, train.hidden, seed=train.seed + 1)
    target = QNetwork(dim, train.hidden, seed=train.seed + 2)
    adam = Adam(online.params(), lr=train.lr)
    buffer = PrioritizedReplay(dim, per)
    scaler = StateScaler(dim, train.state_norm if env_config.feature_mode == "six" else "none",
                         env_config.horizon_s, train.norm_warmup)
    envs = {}
    visits = Counter()
    curve = []
    returns = []
    best_avg = -math.inf
    epsilon = train.epsilon_start
    n_steps = 0
    sync_steps = []
    buffer_max = 0

    for ep_idx in range(1, train.total_episodes + 1):
        episode = episode_sampler(pool, rng, train.sampler, visits)
        visits[episode.episode_id] += 1
        env = envs.get(episode.trial_id)
        if env is None:
            env = envs[episode.trial_id] = FogEnv(series[episode.trial_id], env_config)
        obs = env.reset(episode, rng)
        done = False
        ret = 0.0
        td_sum, td_n, steps = 0.0, 0, 0
        seen = []
        while not done:
            if on_episode is not None:
                seen.append(obs)
            scaler.update(obs)
            action = select_action(online, scaler(obs), epsilon, rng)
            out = env.step(action)
            done = out.done
            ret += out.reward
            buffer.add(Transition(obs, action, out.reward, out.next_state, done))
            buffer_max = max(buffer_max, len(buffer))
            info = {"n_steps": n_steps, "td": None, "indices": None, "buffer": buffer}
            if len(buffer) >= train.batch_size:
                beta = beta_schedule(n_steps, per.beta0, per.beta_increment)
                batch, idx, w = buffer.sample(train.batch_size, beta, rng)
                try:
                    td, _ = train_step(online, target, adam, batch, w, train.gamma, train.clip_norm,
                                       states=scaler(batch.states), next_states=scaler(batch.next_states))
                except NonFiniteLossError:
                    if checkpoint_dir is not None:
                        Agent(online, scaler, env_config).save(checkpoint_dir)
                    raise
                buffer.update_priorities(idx, td)
                td_sum += float(np.abs(td).mean())
                td_n += 1
                info.update(td=td, indices=idx)
            if n_steps % train.target_sync_steps == 0:
                sync_target(online, target)
                sync_steps.append(n_steps)
                info["synced"] = True
            if observer is not None:
                observer(dict(info, online=online, target=target))
            obs = out.next_state
            n_steps += 1
            steps += 1
        if on_episode is not None:
            on_episode(episode, env, seen)
        returns.append(ret)
        window = returns[-100:]
        best_avg = max(best_avg, sum(window) / len(window))
        curve.append(CurveRow(ep_idx, ret, epsilon, td_sum / td_n if td_n else float("nan"), best_avg, steps))
        epsilon = max(train.epsilon_min, epsilon * train.epsilon_decay)
        if ep_idx % 500 == 0:
            log.info("episode %d  return %.2f  best-avg %.2f  eps %.3f", ep_idx, ret, best_avg, epsilon)

    return TrainingResult(Agent(online, scaler, env_config), curve, visits, n_steps, sync_steps, buffer_max)


def trailing_mean_return(curve, n=100):
    tail = [r.ret for r in curve[-n:]]
    return sum(tail) / len(tail)


def write_learning_curve(curve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "return", "epsilon", "mean_abs_td", "best_avg_return", "steps"])
        for r in curve:
            w.writerow([r.episode, repr(r.ret), repr(r.epsilon), repr(r.mean_abs_td), repr(r.best_avg_return), r.steps])


def read_learning_curve(path):
    with open(path, newline="") as fh:
        return [CurveRow(int(r["episode"]), float(r["return"]), float(r["epsilon"]), float(r["mean_abs_td"]),
                         float(r["best_avg_return"]), int(r["steps"])) for r in csv.DictReader(fh)]


def write_coverage(coverage, pool, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode_id", "subject_id", "onset_ms", "visits"])
        for e in pool:
            w.writerow([e.episode_id, e.subject_id, e.onset_ms, coverage.get(e.episode_id, 0)])
