"""TI-stage corpus: per-trial TI series, annotated episodes and per-subject recording time.

On disk a corpus directory holds ``<trial>.ti.csv`` files, ``episodes.csv``
and ``subjects.csv``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .daphnet import FogEpisode
from .dmd import read_ti_series, write_ti_series

EPISODE_HEADER = ["subject_id", "trial_id", "index", "onset_ms", "end_ms", "pre_window_start_ms", "short_history"]
SUBJECT_HEADER = ["subject_id", "in_experiment_minutes", "episodes"]


@dataclass
class Corpus:
    series: dict  # trial_id -> TISeries
    episodes: list
    minutes: dict = field(default_factory=dict)  # subject_id -> in-experiment minutes

    @property
    def subjects(self):
        return sorted({e.subject_id for e in self.episodes} | set(self.minutes))

    def episodes_of(self, subject_id):
        return [e for e in self.episodes if e.subject_id == subject_id]

    def series_of(self, subject_id):
        return [s for s in self.series.values() if s.subject_id == subject_id]

    def density(self, subject_id):
        """Episodes per in-experiment minute."""
        minutes = self.minutes.get(subject_id, 0.0)
        if minutes <= 0:
            raise ValueError(f"subject {subject_id} has no in-experiment time")
        return len(self.episodes_of(subject_id)) / minutes

    def ti_values(self, subject_id):
        parts = [s.ti for s in self.series_of(subject_id)]
        return np.concatenate(parts) if parts else np.empty(0)


def write_corpus(corpus, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for tid in sorted(corpus.series):
        write_ti_series(corpus.series[tid], out / f"{tid}.ti.csv")
    with open(out / "episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_HEADER)
        for e in corpus.episodes:
            w.writerow([e.subject_id, e.trial_id, e.index, e.onset_ms, e.end_ms,
                        e.pre_window_start_ms, int(e.short_history)])
    with open(out / "subjects.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUBJECT_HEADER)
        for sid in corpus.subjects:
            w.writerow([sid, repr(float(corpus.minutes.get(sid, 0.0))), len(corpus.episodes_of(sid))])


def read_episodes(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [FogEpisode(int(r["subject_id"]), r["trial_id"], int(r["index"]), int(r["onset_ms"]),
                       int(r["end_ms"]), int(r["pre_window_start_ms"]), bool(int(r["short_history"])))
            for r in rows]


def read_corpus(in_dir):
    d = Path(in_dir)
    episodes = read_episodes(d / "episodes.csv")
    with open(d / "subjects.csv", newline="") as fh:
        minutes = {int(r["subject_id"]): float(r["in_experiment_minutes"]) for r in csv.DictReader(fh)}
    trial_subject = {e.trial_id: e.subject_id for e in episodes}
    series = {}
    for p in sorted(d.glob("*.ti.csv")):
        tid = p.name[: -len(".ti.csv")]
        sid = trial_subject.get(tid)
        if sid is None:
            sid = int(tid[1:3]) if tid[:1] == "S" and tid[1:3].isdigit() else 0
        series[tid] = read_ti_series(p, subject_id=sid, trial_id=tid)
    return Corpus(series, episodes, minutes)
