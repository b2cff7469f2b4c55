"""Stage runners and the ingest -> transform -> train -> evaluate -> report chain.

Each stage writes into its own directory.  ``run_pipeline`` keeps a
``manifest.json`` in the work directory recording, per stage, the hashes of
its inputs, the configuration it ran with and the hashes of its outputs.  A
stage is skipped when all of these still match; an output file whose bytes
no longer match the manifest stops the run.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import shutil
from pathlib import Path

from . import daphnet
from .corpus import Corpus, read_corpus, write_corpus
from .dmd import ti_series, write_ti_series
from .env import write_trace
from .features import STATE_FIELDS
from .evaluation import (correlations, eval_dependent, eval_loso, render_markdown, write_correlations_csv,
                         write_records_csv, write_report_csv, read_report_csv)
from .plots import emit_plots
from .synthetic import generate_synthetic
from .trainer import read_learning_curve, run_training, write_coverage, write_learning_curve

log = logging.getLogger(__name__)

STAGES = ("ingest", "transform", "synth", "train", "evaluate", "report")
# config sections each stage depends on; a change elsewhere does not invalidate it
STAGE_SECTIONS = {
    "ingest": ("data", "env"),
    "transform": ("dmd",),
    "synth": ("data", "synthetic"),
    "train": ("data", "env", "per", "train"),
    "evaluate": ("data", "env", "per", "train", "eval"),
    "report": (),
}
MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


class ManifestError(RuntimeError):
    pass


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_tree(root):
    root = Path(root)
    if root.is_file():
        return {root.name: sha256_file(root)}
    return {str(p.relative_to(root)): sha256_file(p) for p in sorted(root.rglob("*")) if p.is_file()}


def config_digest(d):
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _select_subjects(corpus, cfg):
    if cfg.data.source != "daphnet":
        return corpus
    keep = set(cfg.data.subjects)
    episodes = [e for e in corpus.episodes if e.subject_id in keep]
    series = {k: s for k, s in corpus.series.items() if s.subject_id in keep}
    minutes = {k: v for k, v in corpus.minutes.items() if k in keep}
    return Corpus(series, episodes, minutes)


def stage_ingest(cfg, data_dir, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = daphnet.find_trial_files(data_dir, tuple(cfg.data.subjects))
    if not files:
        raise FileNotFoundError(f"no Daphnet recordings (S##R##.txt) for subjects {cfg.data.subjects} under {data_dir}")
    episodes, minutes = [], {}
    for path in files:
        trial = daphnet.parse_trial(path)
        daphnet.write_canonical(trial, out / f"{trial.trial_id}.csv")
        episodes.extend(daphnet.extract_episodes(trial, cfg.env.horizon_s))
        minutes[trial.subject_id] = minutes.get(trial.subject_id, 0.0) + trial.in_experiment_minutes()
    write_corpus(Corpus({}, episodes, minutes), out)
    log.info("ingest: %d trials, %d episodes", len(files), len(episodes))


def stage_transform(cfg, in_dir, out_dir):
    src = Path(in_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = cfg.dmd
    for p in sorted(src.glob("S*R*.csv")):
        trial = daphnet.read_canonical(p)
        s = ti_series(trial, d.window_s, d.stride_s, d.delay, d.channels, d.energy_threshold, d.workers)
        write_ti_series(s, out / f"{trial.trial_id}.ti.csv")
    for name in ("episodes.csv", "subjects.csv"):
        shutil.copyfile(src / name, out / name)


def stage_synth(cfg, out_dir):
    corpus = generate_synthetic(cfg.synthetic, cfg.data.seed)
    write_corpus(corpus, out_dir)


def _debug_dumper(trace_file, states_file, dim):
    if not trace_file and not states_file:
        return None
    names = STATE_FIELDS if dim == len(STATE_FIELDS) else tuple(f"x{i}" for i in range(dim))
    if states_file:
        with open(states_file, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(["episode_id", *names])
    first = [True]

    def hook(episode, env, states):
        if trace_file:
            write_trace(env.trace, trace_file, append=not first[0])
        if states_file:
            with open(states_file, "a", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                for s in states:
                    w.writerow([episode.episode_id, *(repr(float(v)) for v in s)])
        first[0] = False

    return hook


def stage_train(cfg, ti_dir, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = _select_subjects(read_corpus(ti_dir), cfg)
    hook = _debug_dumper(cfg.paths.trace_file, cfg.paths.states_file, cfg.env.state_dim)
    result = run_training(corpus.episodes, corpus.series, cfg.train, cfg.env, cfg.per,
                          checkpoint_dir=out / "abort", on_episode=hook)
    result.agent.save(out)
    write_learning_curve(result.curve, out / "learning_curve.csv")
    write_coverage(result.coverage, corpus.episodes, out / "coverage.csv")
    return result


def stage_evaluate(cfg, ti_dir, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = _select_subjects(read_corpus(ti_dir), cfg)
    modes = ("dependent", "loso") if cfg.eval.mode == "both" else (cfg.eval.mode,)
    reports, records = [], []
    for mode in modes:
        fn = eval_loso if mode == "loso" else eval_dependent
        reps, recs = fn(corpus, cfg.train, cfg.env, cfg.per, cfg.eval)
        reports += reps
        records += recs
    write_report_csv(reports, out / "report.csv")
    write_records_csv(records, out / "records.csv")
    (out / "report.md").write_text(render_markdown(reports))
    write_correlations_csv(correlations(reports, corpus), out / "correlations.csv")
    return reports


def stage_report(cfg, train_dir, eval_dir, out_dir):
    curve_path = Path(train_dir) / "learning_curve.csv"
    curve = read_learning_curve(curve_path) if curve_path.exists() else []
    report_path = Path(eval_dir) / "report.csv"
    reports = read_report_csv(report_path) if report_path.exists() else []
    return emit_plots([r.ret for r in curve], reports, out_dir)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def _stage_plan(cfg):
    p = cfg.paths
    dirs = {s: Path(p.resolved(s)) for s in ("ingest", "ti", "train", "eval", "report")}
    plan = []
    if cfg.data.source == "daphnet":
        plan.append(("ingest", [Path(cfg.data.data_dir)], dirs["ingest"],
                     lambda: stage_ingest(cfg, cfg.data.data_dir, dirs["ingest"])))
        plan.append(("transform", [dirs["ingest"]], dirs["ti"],
                     lambda: stage_transform(cfg, dirs["ingest"], dirs["ti"])))
    else:
        plan.append(("synth", [], dirs["ti"], lambda: stage_synth(cfg, dirs["ti"])))
    plan.append(("train", [dirs["ti"]], dirs["train"], lambda: stage_train(cfg, dirs["ti"], dirs["train"])))
    plan.append(("evaluate", [dirs["ti"]], dirs["eval"], lambda: stage_evaluate(cfg, dirs["ti"], dirs["eval"])))
    plan.append(("report", [dirs["train"], dirs["eval"]], dirs["report"],
                 lambda: stage_report(cfg, dirs["train"], dirs["eval"], dirs["report"])))
    return plan


def _inputs_digest(paths):
    h = hashlib.sha256()
    for p in paths:
        if Path(p).exists():
            for name, digest in hash_tree(p).items():
                h.update(f"{p}:{name}:{digest}\n".encode())
        else:
            h.update(f"{p}:missing\n".encode())
    return h.hexdigest()


def run_pipeline(cfg, force=False):
    """Run every stage in order; returns ``{stage: "ran" | "skipped"}``."""
    work = Path(cfg.paths.work_dir)
    work.mkdir(parents=True, exist_ok=True)
    manifest_path = work / MANIFEST
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"stages": {}}
    cfg_dict = cfg.to_dict()
    manifest["config"] = cfg_dict
    status = {}
    for name, inputs, out_dir, run in _stage_plan(cfg):
        entry = manifest["stages"].get(name)
        in_digest = _inputs_digest(inputs)
        cfg_digest = config_digest({k: cfg_dict[k] for k in STAGE_SECTIONS[name]})
        if not force and entry and out_dir.exists():
            current = hash_tree(out_dir)
            changed = sorted(k for k, v in entry["outputs"].items() if current.get(k) != v)
            if changed:
                raise StageError(name, ManifestError(
                    f"intermediate output in {out_dir} no longer matches the manifest "
                    f"({', '.join(changed[:5])}); rerun with --force to rebuild"))
            if entry["inputs"] == in_digest and entry["config"] == cfg_digest:
                status[name] = "skipped"
                log.info("%s: up to date, skipped", name)
                continue
        log.info("%s: running", name)
        try:
            run()
        except Exception as exc:
            raise StageError(name, exc) from exc
        manifest["stages"][name] = {"inputs": in_digest, "config": cfg_digest, "outputs": hash_tree(out_dir)}
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        status[name] = "ran"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status

