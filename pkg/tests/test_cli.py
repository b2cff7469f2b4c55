import json

import pytest

from fogrl import cli
from fogrl.config import ConfigError, apply_env_overrides, from_dict, load_config, set_key
from fogrl.pipeline import run_pipeline, StageError

TINY = {
    "data": {"source": "synthetic"},
    "synthetic": {"n_subjects": 3, "episodes_per_subject": 3},
    "train": {"total_episodes": 20, "batch_size": 16, "hidden": [8], "target_sync_steps": 20},
    "eval": {"mode": "both"},
}


@pytest.fixture
def tiny_config(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    return p


def test_env_override_and_unknown_keys():
    cfg = load_config(None, {"FOGRL_TRAIN__BATCH_SIZE": "64", "FOGRL_DATA__SOURCE": "synthetic", "HOME": "/x"})
    assert cfg.train.batch_size == 64 and cfg.data.source == "synthetic"
    with pytest.raises(ConfigError):
        from_dict({"train": {"batch": 3}})
    with pytest.raises(ConfigError):
        from_dict({"schema_version": 99})
    with pytest.raises(ConfigError):
        apply_env_overrides({}, {"FOGRL_NOPE__X": "1"})
    with pytest.raises(ConfigError):
        set_key(load_config(None, {}), "env.scheme", "bogus")


def test_print_config_round_trip(tmp_path, capsys, tiny_config):
    assert cli.main(["train", "--config", str(tiny_config), "--episodes", "7", "--print-config"]) == 0
    first = capsys.readouterr().out
    (tmp_path / "dump.json").write_text(first)
    assert cli.main(["train", "--config", str(tmp_path / "dump.json"), "--print-config"]) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["train"]["total_episodes"] == 7


def test_every_flag_maps_to_one_key(capsys):
    parser = cli.build_parser()
    subparsers = parser._subparsers._group_actions[0].choices
    dests = {a.dest for sub in subparsers.values() for a in sub._actions}
    control = {"help", "config", "print_config", "verbose", "force"}
    assert dests - control == set(cli._KEYS)
    defaults = json.loads(load_config(None, {}).to_json())
    for key in cli._KEYS.values():
        section, name = key.split(".")
        assert name in defaults[section]


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["synth", "--config", str(tmp_path / "bad.json")]) == 1
    assert cli.main(["ingest", "--data-dir", str(tmp_path), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["synth", "--out", str(tmp_path / "ti"), "--seed", "2"]) == 0
    assert (tmp_path / "ti" / "episodes.csv").exists()


def test_internal_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise RuntimeError("kaput")
    monkeypatch.setattr(cli, "stage_synth", boom)
    assert cli.main(["synth", "--out", str(tmp_path)]) == 2
    assert "kaput" in capsys.readouterr().err


def test_stagewise_commands(tmp_path, tiny_config):
    ti, tr, ev, rp = (str(tmp_path / d) for d in ("ti", "train", "eval", "report"))
    c = ["--config", str(tiny_config)]
    assert cli.main(["synth", *c, "--out", ti]) == 0
    assert cli.main(["train", *c, "--ti-dir", ti, "--out", tr, "--trace", str(tmp_path / "trace.csv"),
                     "--dump-states", str(tmp_path / "states.csv")]) == 0
    assert cli.main(["evaluate", *c, "--ti-dir", ti, "--out", ev, "--mode", "loso"]) == 0
    assert cli.main(["report", *c, "--train-dir", tr, "--eval-dir", ev, "--out", rp]) == 0
    for f in ("train/qnet.bin", "train/agent.json", "train/learning_curve.csv", "train/coverage.csv",
              "eval/report.csv", "eval/report.md", "eval/correlations.csv", "report/learning_curve.svg",
              "report/horizons.svg"):
        assert (tmp_path / f).exists(), f
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "t_ms,tau_s,action,reward,done"
    assert sum(line.endswith(",1") for line in trace[1:]) == 20
    states = (tmp_path / "states.csv").read_text().splitlines()
    assert states[0] == "episode_id,tau_s,mean,std,slope,spike,zscore"
    assert len(states) == len(trace)


def test_daphnet_stages(tmp_path):
    from fogrl.synthetic import synthetic_daphnet_trial, write_daphnet_text
    raw = tmp_path / "raw"
    raw.mkdir()
    for sid in (1, 2):
        write_daphnet_text(synthetic_daphnet_trial(subject_id=sid, seed=sid), raw / f"S{sid:02d}R01.txt")
    work = tmp_path / "w"
    assert cli.main(["ingest", "--data-dir", str(raw), "--out", str(work / "ingest")]) == 0
    assert cli.main(["transform", "--in", str(work / "ingest"), "--out", str(work / "ti"), "--stride", "0.5"]) == 0
    ti_csv = (work / "ti" / "S01R01.ti.csv").read_text().splitlines()
    assert ti_csv[0] == "t_ms,ti" and len(ti_csv) > 100
    assert (work / "ti" / "episodes.csv").read_text().count("\n") == 5


def test_pipeline_skip_force_and_corruption(tmp_path):
    cfg = from_dict(dict(TINY, paths={"work_dir": str(tmp_path / "run")}))
    assert set(run_pipeline(cfg).values()) == {"ran"}
    assert set(run_pipeline(cfg).values()) == {"skipped"}
    assert set(run_pipeline(cfg, force=True).values()) == {"ran"}
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"synth", "train", "evaluate", "report"}
    assert manifest["config"]["train"]["total_episodes"] == 20
    with open(tmp_path / "run" / "train" / "learning_curve.csv", "a") as fh:
        fh.write("tampered\n")
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "train" and "manifest" in str(err.value)
    assert cli.main(["all", "--out", str(tmp_path / "run"), "--source", "synthetic"]) == 1


def test_pipeline_reruns_downstream_on_config_change(tmp_path):
    cfg = from_dict(dict(TINY, paths={"work_dir": str(tmp_path / "run")}))
    run_pipeline(cfg)
    changed = set_key(cfg, "eval.mode", "loso")
    status = run_pipeline(changed)
    assert status == {"synth": "skipped", "train": "skipped", "evaluate": "ran", "report": "ran"}


def test_stage_failure_names_stage(tmp_path):
    cfg = from_dict({"data": {"source": "daphnet", "data_dir": str(tmp_path / "none")},
                     "paths": {"work_dir": str(tmp_path / "run")}})
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "ingest" and isinstance(err.value.cause, FileNotFoundError)
