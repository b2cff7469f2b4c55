"""Command-line entry point (``fogrl``).

Every option except ``--config``, ``--print-config``, ``--force`` and
``--verbose`` sets exactly one configuration key; the effective configuration
is file < environment (``FOGRL_<SECTION>__<KEY>``) < flags.

Exit codes: 0 success, 1 user error (bad config, missing or malformed
input), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import daphnet
from .config import ConfigError, load_config, set_key
from .dmd import DegenerateInputError
from .pipeline import (ManifestError, StageError, run_pipeline, stage_evaluate, stage_ingest, stage_report,
                       stage_synth, stage_train, stage_transform)
from .synthetic import InfeasibleSpecError

log = logging.getLogger("fogrl")

USER_ERRORS = (ConfigError, FileNotFoundError, IsADirectoryError, daphnet.DaphnetParseError,
               daphnet.EmptyInputError, daphnet.UndefinedDensityError, InfeasibleSpecError,
               DegenerateInputError, ManifestError)

# option dest -> config key
_KEYS = {
    "data_dir": "data.data_dir",
    "subjects": "data.subjects",
    "source": "data.source",
    "seed": "data.seed",
    "ingest_out": "paths.ingest_dir",
    "ingest_in": "paths.ingest_dir",
    "ti_out": "paths.ti_dir",
    "ti_dir": "paths.ti_dir",
    "window": "dmd.window_s",
    "stride": "dmd.stride_s",
    "delay": "dmd.delay",
    "workers": "dmd.workers",
    "train_out": "paths.train_dir",
    "train_dir": "paths.train_dir",
    "episodes": "train.total_episodes",
    "batch_size": "train.batch_size",
    "train_seed": "train.seed",
    "trace": "paths.trace_file",
    "dump_states": "paths.states_file",
    "mode": "eval.mode",
    "eval_out": "paths.eval_dir",
    "eval_dir": "paths.eval_dir",
    "report_out": "paths.report_dir",
    "work_dir": "paths.work_dir",
}


def _common(p):
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")


def _train_opts(p):
    p.add_argument("--episodes", type=int, help="training episodes")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--train-seed", type=int)
    p.add_argument("--trace", metavar="CSV", help="write per-step training traces")
    p.add_argument("--dump-states", metavar="CSV", help="write every observed state")


def build_parser():
    parser = argparse.ArgumentParser(prog="fogrl", description="FoG onset prediction with TI states and a DDQN agent")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse Daphnet recordings into canonical CSV and episodes")
    _common(p)
    p.add_argument("--data-dir", help="directory holding S##R##.txt files")
    p.add_argument("--subjects", type=lambda s: [int(x) for x in s.split(",")], help="comma-separated ids")
    p.add_argument("--out", dest="ingest_out")

    p = sub.add_parser("transform", help="compute TI series from canonical trials")
    _common(p)
    p.add_argument("--in", dest="ingest_in")
    p.add_argument("--out", dest="ti_out")
    p.add_argument("--window", type=float, help="DMD window (s)")
    p.add_argument("--stride", type=float, help="DMD stride (s)")
    p.add_argument("--delay", type=int, help="delay-embedding depth")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("synth", help="generate a synthetic TI corpus")
    _common(p)
    p.add_argument("--out", dest="ti_out")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train one agent on every episode in a TI corpus")
    _common(p)
    p.add_argument("--ti-dir")
    p.add_argument("--out", dest="train_out")
    _train_opts(p)

    p = sub.add_parser("evaluate", help="LOSO and/or subject-dependent evaluation")
    _common(p)
    p.add_argument("--ti-dir")
    p.add_argument("--mode", choices=("loso", "dependent", "both"))
    p.add_argument("--out", dest="eval_out")
    p.add_argument("--episodes", type=int, help="training episodes per fold")

    p = sub.add_parser("report", help="render SVG figures from training and evaluation outputs")
    _common(p)
    p.add_argument("--train-dir")
    p.add_argument("--eval-dir")
    p.add_argument("--out", dest="report_out")

    p = sub.add_parser("all", help="run every stage, skipping those already up to date")
    _common(p)
    p.add_argument("--source", choices=("daphnet", "synthetic"))
    p.add_argument("--data-dir")
    p.add_argument("--mode", choices=("loso", "dependent", "both"))
    p.add_argument("--out", dest="work_dir")
    p.add_argument("--force", action="store_true", help="re-run stages even when outputs exist")
    _train_opts(p)
    return parser


def resolve_config(args, environ=None):
    cfg = load_config(args.config, environ)
    for dest, key in _KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg = set_key(cfg, key, value)
    return cfg


def _dispatch(args, cfg):
    p = cfg.paths
    cmd = args.command
    if cmd == "ingest":
        if not cfg.data.data_dir:
            raise ConfigError("no data directory (use --data-dir or data.data_dir)")
        stage_ingest(cfg, cfg.data.data_dir, p.resolved("ingest"))
    elif cmd == "transform":
        stage_transform(cfg, p.resolved("ingest"), p.resolved("ti"))
    elif cmd == "synth":
        stage_synth(cfg, p.resolved("ti"))
    elif cmd == "train":
        stage_train(cfg, p.resolved("ti"), p.resolved("train"))
    elif cmd == "evaluate":
        stage_evaluate(cfg, p.resolved("ti"), p.resolved("eval"))
    elif cmd == "report":
        stage_report(cfg, p.resolved("train"), p.resolved("eval"), p.resolved("report"))
    elif cmd == "all":
        status = run_pipeline(cfg, force=args.force)
        for name, state in status.items():
            print(f"{name}: {state}")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_json())
            return 0
        _dispatch(args, cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc.cause, USER_ERRORS) else 2
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
