"""Subject-dependent and leave-one-subject-out evaluation, metrics and statistics."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy import stats as sps

from .env import FogEnv, SkipEpisode, Terminal
from .reference import HEADLINE, REFERENCE
from .trainer import run_training, usable_episodes

log = logging.getLogger(__name__)


@dataclass
class EvalConfig:
    mode: str = "loso"  # loso | dependent | both
    split: float = 0.8
    seed: int = 0
    start: str = "max"  # max | random
    workers: int = 1

    def __post_init__(self):
        if self.mode not in ("loso", "dependent", "both"):
            raise ValueError(f"unknown evaluation mode {self.mode!r}")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.start not in ("max", "random"):
            raise ValueError(f"unknown start rule {self.start!r}")


@dataclass
class PredictionRecord:
    episode_id: str
    subject_id: int
    placed: bool
    misplaced: bool
    tau_at_place_s: float | None
    reward: float

    def __post_init__(self):
        if self.misplaced and not self.placed:
            raise ValueError("a misplaced record must be placed")
        if (self.tau_at_place_s is not None) != (self.placed and not self.misplaced):
            raise ValueError("tau_at_place_s is present iff placed and not misplaced")

    @property
    def undecided(self):
        return not self.placed


@dataclass
class SubjectReport:
    subject_id: int
    mode: str = ""
    mean_reward: float | None = None
    mean_prediction_point_s: float | None = None
    std_prediction_point_s: float | None = None
    longest_horizon_s: float | None = None
    shortest_horizon_s: float | None = None
    misplaced: int = 0
    total: int = 0
    undecided_count: int = 0
    n_train_episodes: int = 0
    n_test_episodes: int = 0
    fold: str = ""

    @property
    def misplaced_ratio(self):
        return f"{self.misplaced}:{self.total}"

    @property
    def misplaced_fraction(self):
        return self.misplaced / self.total if self.total else float("nan")


REPORT_COLUMNS = [f.name for f in fields(SubjectReport)] + ["misplaced_ratio"]


def compute_metrics(records, subject_id=0):
    """Aggregate rollouts into one report row.

    Horizon statistics use only placed, non-misplaced records (population
    std); the mean reward uses every record.  ``total`` counts every
    evaluated episode.
    """
    taus = np.array([r.tau_at_place_s for r in records if r.tau_at_place_s is not None], dtype=np.float64)
    rep = SubjectReport(subject_id=subject_id)
    if records:
        rep.mean_reward = float(np.mean([r.reward for r in records]))
    if taus.size:
        rep.mean_prediction_point_s = float(taus.mean())
        rep.std_prediction_point_s = float(taus.std())
        rep.longest_horizon_s = float(taus.max())
        rep.shortest_horizon_s = float(taus.min())
    rep.misplaced = sum(r.misplaced for r in records)
    rep.total = len(records)
    rep.undecided_count = sum(r.undecided for r in records)
    rep.n_test_episodes = len(records)
    return rep


def rollout(agent, series, episode, rng=None, start="max"):
    """Greedy rollout that may run on into the freeze; returns a PredictionRecord."""
    env = FogEnv(series, agent.env_config, extend_past_onset=True)
    offset = agent.env_config.horizon_s if start == "max" else None
    rng = rng if rng is not None else np.random.default_rng(0)
    obs = env.reset(episode, rng, offset_s=offset)
    total = 0.0
    while True:
        out = env.step(agent.act(obs))
        total += out.reward
        obs = out.next_state
        if out.done:
            break
    kind = out.info["terminal_kind"]
    placed = kind == Terminal.PLACED
    misplaced = placed and out.info["misplaced"]
    tau = out.info["tau_at_action_s"] if placed and not misplaced else None
    return PredictionRecord(episode.episode_id, episode.subject_id, placed, misplaced, tau, total)


def evaluate_agent(agent, episodes, series, seed=0, start="max"):
    rng = np.random.default_rng(seed)
    records = []
    for e in episodes:
        try:
            records.append(rollout(agent, series[e.trial_id], e, rng, start))
        except SkipEpisode:
            log.warning("episode %s has no TI history; not evaluated", e.episode_id)
    return records


def split_episodes(episodes, split=0.8, seed=0):
    """Seeded shuffle, then the first ``floor(split*n)`` episodes train (at least one each side)."""
    n = len(episodes)
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(max(int(math.floor(split * n)), 1), n - 1)
    shuffled = [episodes[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def eval_subject_dependent(corpus, subject_id, train, env_config, per, eval_config=None):
    ec = eval_config or EvalConfig()
    episodes = usable_episodes(corpus.episodes_of(subject_id), corpus.series)
    if len(episodes) < 2:
        log.warning("subject %s has %d usable episodes; skipped", subject_id, len(episodes))
        return None, []
    seed = ec.seed + subject_id
    train_eps, test_eps = split_episodes(episodes, ec.split, seed)
    result = run_training(train_eps, corpus.series, replace(train, seed=train.seed + subject_id), env_config, per)
    records = evaluate_agent(result.agent, test_eps, corpus.series, seed, ec.start)
    rep = compute_metrics(records, subject_id)
    rep.mode, rep.fold = "dependent", f"split{ec.split:g}-seed{seed}"
    rep.n_train_episodes = len(train_eps)
    return rep, records


def eval_loso_fold(corpus, held_out, train, env_config, per, eval_config=None):
    ec = eval_config or EvalConfig()
    train_eps = [e for e in corpus.episodes if e.subject_id != held_out]
    test_eps = corpus.episodes_of(held_out)
    result = run_training(train_eps, corpus.series, replace(train, seed=train.seed + held_out), env_config, per)
    records = evaluate_agent(result.agent, test_eps, corpus.series, ec.seed + held_out, ec.start)
    rep = compute_metrics(records, held_out)
    rep.mode, rep.fold = "loso", f"holdout-{held_out}"
    rep.n_train_episodes = len(usable_episodes(train_eps, corpus.series))
    return rep, records


def _run_folds(fn, corpus, subjects, train, env_config, per, ec):
    if ec.workers > 1 and len(subjects) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(ec.workers) as pool:
            futures = {s: pool.submit(fn, corpus, s, train, env_config, per, ec) for s in subjects}
            results = {s: f.result() for s, f in futures.items()}
    else:
        results = {s: fn(corpus, s, train, env_config, per, ec) for s in subjects}
    reports, records = [], []
    for s in sorted(results):
        rep, recs = results[s]
        if rep is not None:
            reports.append(rep)
            records.extend(recs)
    return reports, records


def eval_loso(corpus, train, env_config, per, eval_config=None, subjects=None):
    """One fold per subject: train on everyone else, evaluate every held-out episode."""
    ec = eval_config or EvalConfig()
    subjects = sorted(subjects or corpus.subjects)
    return _run_folds(eval_loso_fold, corpus, subjects, train, env_config, per, ec)


def eval_dependent(corpus, train, env_config, per, eval_config=None, subjects=None):
    ec = eval_config or EvalConfig()
    subjects = sorted(subjects or corpus.subjects)
    return _run_folds(eval_subject_dependent, corpus, subjects, train, env_config, per, ec)


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def average_ranks(x):
    """1-based ranks; tied values share the mean of the positions they occupy."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x, y):
    """Rank correlation with a two-sided p-value from the t approximation."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ValueError("need two equal-length samples of size >= 3")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return float("nan"), float("nan")
    rho = max(-1.0, min(1.0, float(dx @ dy) / denom))
    n = len(x)
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2.0 * sps.t.sf(abs(t), n - 2))


def coefficient_of_variation(taus):
    """Population std over mean; None when the mean is zero or there are no values."""
    t = np.asarray(taus, dtype=np.float64)
    if t.size == 0:
        return None
    mean = t.mean()
    if mean == 0.0:
        return None
    return float(t.std() / mean)


def ti_variance(ti_values):
    t = np.asarray(ti_values, dtype=np.float64)
    return float(t.var())


def correlations(reports, corpus):
    """Spearman tests of misplaced fraction against FOG density and TI variance, per mode."""
    rows = []
    for mode in sorted({r.mode for r in reports}):
        reps = [r for r in reports if r.mode == mode and r.total > 0]
        if len(reps) < 3:
            continue
        frac = [r.misplaced_fraction for r in reps]
        predictors = {
            "fog_density": [corpus.density(r.subject_id) for r in reps],
            "ti_variance": [ti_variance(corpus.ti_values(r.subject_id)) for r in reps],
        }
        for name, xs in predictors.items():
            rho, p = spearman_rho(xs, frac)
            rows.append({"mode": mode, "x": name, "y": "misplaced_ratio", "rho": rho, "p_value": p, "n": len(reps)})
    return rows


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS[:-1]] + [r.misplaced_ratio])


def read_report_csv(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(SubjectReport):
                v = row[f.name]
                if f.name in ("mode", "fold"):
                    kw[f.name] = v
                elif f.name in ("subject_id", "misplaced", "total", "undecided_count",
                                "n_train_episodes", "n_test_episodes"):
                    kw[f.name] = int(v)
                else:
                    kw[f.name] = float(v) if v != "" else None
            out.append(SubjectReport(**kw))
    return out


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode_id", "subject_id", "placed", "misplaced", "tau_at_place_s", "reward"])
        for r in records:
            w.writerow([r.episode_id, r.subject_id, int(r.placed), int(r.misplaced), _fmt(r.tau_at_place_s), repr(r.reward)])


def write_correlations_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "x", "y", "rho", "p_value", "n"])
        for r in rows:
            w.writerow([r["mode"], r["x"], r["y"], repr(r["rho"]), repr(r["p_value"]), r["n"]])


_MD_ROWS = [
    ("Mean - reward", "mean_reward"),
    ("Mean - prediction point (s)", "mean_prediction_point_s"),
    ("Std Dev - prediction point (s)", "std_prediction_point_s"),
    ("The longest prediction horizon (s)", "longest_horizon_s"),
    ("The shortest prediction horizon (s)", "shortest_horizon_s"),
    ("Misplaced ratio", "misplaced_ratio"),
    ("Undecided prediction point", "undecided_count"),
]
_MODE_TITLES = {"dependent": "Subject Dependent", "loso": "Subject Independent (LOSO)"}


def _cell(v):
    if v is None:
        return "n/a"
    if isinstance(v, tuple):
        return f"{v[0]}:{v[1]}"
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def summary(reports, mode):
    reps = [r for r in reports if r.mode == mode]
    longest = [r.longest_horizon_s for r in reps if r.longest_horizon_s is not None]
    means = [r.mean_prediction_point_s for r in reps if r.mean_prediction_point_s is not None]
    return {
        "max_horizon_s": max(longest) if longest else None,
        "mean_horizon_s": float(np.mean(means)) if means else None,
    }


def render_markdown(reports):
    lines = ["# Evaluation report", ""]
    for mode in ("dependent", "loso"):
        reps = sorted((r for r in reports if r.mode == mode), key=lambda r: r.subject_id)
        if not reps:
            continue
        ref = REFERENCE[mode]
        ids = [r.subject_id for r in reps]
        lines += [f"## {_MODE_TITLES[mode]}", "", "Cells show `this run (published reference)`.", ""]
        lines.append("| Variable | " + " | ".join(str(i) for i in ids) + " |")
        lines.append("|---" * (len(ids) + 1) + "|")
        for label, key in _MD_ROWS:
            cells = []
            for r in reps:
                ours = r.misplaced_ratio if key == "misplaced_ratio" else getattr(r, key)
                theirs = ref[key].get(r.subject_id)
                cells.append(f"{_cell(ours)} ({_cell(theirs)})" if theirs is not None else _cell(ours))
            lines.append(f"| {label} | " + " | ".join(cells) + " |")
        s = summary(reports, mode)
        h = HEADLINE[mode]
        lines += ["",
                  f"- Longest horizon over subjects: {_cell(s['max_horizon_s'])} s (published {h['max_horizon_s']:.2f} s)",
                  f"- Mean of per-subject mean prediction points: {_cell(s['mean_horizon_s'])} s "
                  f"(published {h['mean_horizon_s']:.2f} s)",
                  ""]
    lines.append("Published values are a qualitative reference only; training is stochastic and several "
                 "hyperparameters were never reported.")
    return "\n".join(lines) + "\n"
