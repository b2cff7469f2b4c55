"""Daphnet freezing-of-gait recordings: parsing, episode segmentation, density.

Raw files hold one sample per line with 11 whitespace-separated integers::

    t_ms  ankle_x ankle_y ankle_z  thigh_x thigh_y thigh_z  trunk_x trunk_y trunk_z  annotation

Acceleration is in milli-g.  Annotation 0 marks samples recorded outside the
experiment, 1 normal walking (no freeze) and 2 freeze.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import _accel

SAMPLE_RATE_HZ = 64.0
N_CHANNELS = 9
CHANNEL_NAMES = (
    "ankle_x", "ankle_y", "ankle_z",
    "thigh_x", "thigh_y", "thigh_z",
    "trunk_x", "trunk_y", "trunk_z",
)
CANONICAL_HEADER = ["t_ms"] + [f"ch{i}" for i in range(1, N_CHANNELS + 1)] + ["ann"]
TABLE_SUBJECTS = (1, 2, 3, 5, 6, 7, 8, 9)

_FILE_RE = re.compile(r"S(\d+)R(\d+)", re.IGNORECASE)


class Annotation(enum.IntEnum):
    OUT_OF_EXPERIMENT = 0
    NO_FREEZE = 1
    FREEZE = 2


class DaphnetParseError(ValueError):
    """A raw recording line could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, path, lineno, reason):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}: line {lineno}: {reason}")


class EmptyInputError(ValueError):
    pass


class UndefinedDensityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RawTrial:
    subject_id: int
    trial_id: str
    t_ms: np.ndarray  # int64, strictly increasing
    channels: np.ndarray  # (n, 9) float64, milli-g
    annotation: np.ndarray  # int8 in {0, 1, 2}
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __len__(self):
        return self.t_ms.shape[0]

    @property
    def in_experiment(self):
        return self.annotation != Annotation.OUT_OF_EXPERIMENT

    def in_experiment_minutes(self):
        return float(np.count_nonzero(self.in_experiment)) / self.sample_rate_hz / 60.0


@dataclass(frozen=True)
class FogEpisode:
    subject_id: int
    trial_id: str
    index: int
    onset_ms: int
    end_ms: int
    pre_window_start_ms: int
    short_history: bool = False

    @property
    def episode_id(self):
        return f"{self.trial_id}#{self.index}"

    @property
    def duration_s(self):
        return (self.end_ms - self.onset_ms) / 1000.0


class Gender(str, enum.Enum):
    M = "M"
    F = "F"


class Medication(str, enum.Enum):
    ON = "ON"
    OFF = "OFF"


@dataclass(frozen=True)
class SubjectMeta:
    id: int
    gender: Gender
    age_years: int
    disease_duration_years: int
    hoehn_yahr: float
    tested_in: Medication


def load_subject_meta():
    """Bundled demographic table for the eight subjects used in evaluation."""
    text = resources.files("fogrl.data").joinpath("subjects.json").read_text()
    rows = json.loads(text)["subjects"]
    return {
        r[0]: SubjectMeta(r[0], Gender(r[1]), int(r[2]), int(r[3]), float(r[4]), Medication(r[5]))
        for r in rows
    }


def _validate(path, t_ms, channels, ann):
    bad = np.flatnonzero(np.diff(t_ms) <= 0)
    if bad.size:
        raise DaphnetParseError(path, int(bad[0]) + 2, "timestamps must be strictly increasing")
    finite = np.isfinite(channels).all(axis=1)
    if not finite.all():
        raise DaphnetParseError(path, int(np.argmin(finite)) + 1, "non-finite channel value")
    ok = np.isin(ann, (0, 1, 2))
    if not ok.all():
        raise DaphnetParseError(path, int(np.argmin(ok)) + 1, f"annotation {ann[np.argmin(ok)]} not in {{0,1,2}}")


def _scan_lines(path, lines):
    rows = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 11:
            raise DaphnetParseError(path, lineno, f"expected 11 fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise DaphnetParseError(path, lineno, "non-numeric token") from None
    return rows


def trial_id_from_path(path):
    m = _FILE_RE.search(Path(path).stem)
    if m is None:
        raise ValueError(f"cannot derive subject/run from file name {Path(path).name!r}")
    return int(m.group(1)), f"S{int(m.group(1)):02d}R{int(m.group(2)):02d}"


def parse_trial(path, subject_id=None, trial_id=None):
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise EmptyInputError(f"{path}: empty input")
    if subject_id is None or trial_id is None:
        sid, tid = trial_id_from_path(path)
        subject_id = sid if subject_id is None else subject_id
        trial_id = tid if trial_id is None else trial_id
    rows = _scan_lines(path, text.splitlines())
    data = np.asarray(rows, dtype=np.float64)
    t_ms = data[:, 0].astype(np.int64)
    if not np.array_equal(t_ms, data[:, 0]):
        raise DaphnetParseError(path, int(np.argmax(t_ms != data[:, 0])) + 1, "non-integer timestamp")
    channels = np.ascontiguousarray(data[:, 1:10])
    ann = data[:, 10].astype(np.int8)
    _validate(path, t_ms, channels, data[:, 10])
    return RawTrial(int(subject_id), trial_id, t_ms, channels, ann)


def write_canonical(trial, path):
    """Write ``t_ms,ch1..ch9,ann``; reals use the shortest round-tripping repr."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANONICAL_HEADER)
        for t, ch, a in zip(trial.t_ms.tolist(), trial.channels.tolist(), trial.annotation.tolist()):
            w.writerow([t, *(repr(v) for v in ch), a])


def read_canonical(path, subject_id=None, trial_id=None):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CANONICAL_HEADER:
            raise DaphnetParseError(path, 1, "bad canonical header")
        rows = [r for r in reader if r]
    if not rows:
        raise EmptyInputError(f"{path}: empty input")
    t_ms = np.array([int(r[0]) for r in rows], dtype=np.int64)
    channels = np.array([[float(v) for v in r[1:10]] for r in rows], dtype=np.float64)
    ann = np.array([int(r[10]) for r in rows], dtype=np.int8)
    if subject_id is None or trial_id is None:
        subject_id, trial_id = trial_id_from_path(path)
    return RawTrial(int(subject_id), trial_id, t_ms, channels, ann)


def _history_start_index(ann, onset_idx):
    i = onset_idx
    while i > 0 and ann[i - 1] != Annotation.OUT_OF_EXPERIMENT:
        i -= 1
    return i


def extract_episodes(trial, horizon_s=15.0):
    """One episode per maximal run of freeze samples.

    Out-of-experiment samples break a run like any other non-freeze sample.
    ``pre_window_start_ms`` is ``onset - horizon`` clamped to the start of the
    contiguous in-experiment stretch leading up to the onset; episodes with
    less history than the horizon are flagged ``short_history``.
    """
    ann = np.asarray(trial.annotation)
    starts, ends = _accel.runs(ann == Annotation.FREEZE)
    horizon_ms = int(round(horizon_s * 1000))
    episodes = []
    for k, (s, e) in enumerate(zip(starts.tolist(), ends.tolist())):
        onset = int(trial.t_ms[s])
        hist_start = int(trial.t_ms[_history_start_index(ann, s)])
        available = onset - hist_start
        episodes.append(FogEpisode(
            subject_id=trial.subject_id,
            trial_id=trial.trial_id,
            index=k,
            onset_ms=onset,
            end_ms=int(trial.t_ms[e]),
            pre_window_start_ms=max(hist_start, onset - horizon_ms),
            short_history=available < horizon_ms,
        ))
    return episodes


def fog_density(trials, episodes=None):
    """Freeze episodes per minute of in-experiment recording."""
    minutes = sum(t.in_experiment_minutes() for t in trials)
    if minutes <= 0:
        raise UndefinedDensityError("no in-experiment recording time")
    if episodes is None:
        count = sum(len(extract_episodes(t)) for t in trials)
    else:
        count = len(episodes)
    return count / minutes


def find_trial_files(data_dir, subjects=TABLE_SUBJECTS):
    found = []
    for p in sorted(Path(data_dir).rglob("*.txt")):
        m = _FILE_RE.fullmatch(p.stem)
        if m and int(m.group(1)) in subjects:
            found.append(p)
    return found


def load_corpus(data_dir, subjects=TABLE_SUBJECTS):
    """Parse every recording of the selected subjects, keyed by subject id."""
    corpus = {}
    for path in find_trial_files(data_dir, subjects):
        trial = parse_trial(path)
        corpus.setdefault(trial.subject_id, []).append(trial)
    return corpus
