"""One JSON document configures the whole pipeline.

Sections mirror the module configs.  Unknown keys are rejected and the
``schema_version`` must match.  Any key can be overridden from the
environment as ``FOGRL_<SECTION>__<KEY>=<json value>``, e.g.
``FOGRL_TRAIN__BATCH_SIZE=64``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass

from .env import EnvConfig
from .evaluation import EvalConfig
from .replay import PerConfig
from .synthetic import SyntheticSpec
from .trainer import TrainConfig

SCHEMA_VERSION = 1
ENV_PREFIX = "FOGRL_"


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    source: str = "daphnet"  # daphnet | synthetic
    data_dir: str = ""
    subjects: list = field(default_factory=lambda: [1, 2, 3, 5, 6, 7, 8, 9])
    seed: int = 0  # synthetic corpus seed

    def __post_init__(self):
        if self.source not in ("daphnet", "synthetic"):
            raise ValueError(f"unknown data source {self.source!r}")


@dataclass
class DmdConfig:
    window_s: float = 2.0
    stride_s: float = 0.25
    delay: int = 10
    channels: list | None = None
    energy_threshold: float = 0.99
    workers: int = 1


@dataclass
class PathsConfig:
    work_dir: str = "run"
    ingest_dir: str = ""
    ti_dir: str = ""
    train_dir: str = ""
    eval_dir: str = ""
    report_dir: str = ""
    trace_file: str = ""  # per-step training traces, CSV
    states_file: str = ""  # raw observed states, CSV

    def resolved(self, stage):
        explicit = getattr(self, f"{stage}_dir", "")
        return explicit or os.path.join(self.work_dir, stage)


@dataclass
class PipelineConfig:
    schema_version: int = SCHEMA_VERSION
    data: DataConfig = field(default_factory=DataConfig)
    dmd: DmdConfig = field(default_factory=DmdConfig)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    env: EnvConfig = field(default_factory=EnvConfig)
    per: PerConfig = field(default_factory=PerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTION_TYPES = {
    "data": DataConfig, "dmd": DmdConfig, "synthetic": SyntheticSpec, "env": EnvConfig,
    "per": PerConfig, "train": TrainConfig, "eval": EvalConfig, "paths": PathsConfig,
}


def _build(cls, values, where):
    if not isinstance(values, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version} is not supported (expected {SCHEMA_VERSION})")
    unknown = sorted(set(d) - set(_SECTION_TYPES) - {"schema_version"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    kwargs = {name: _build(cls, d.get(name, {}), name) for name, cls in _SECTION_TYPES.items()}
    return PipelineConfig(schema_version=version, **kwargs)


def load_config(path=None, environ=None):
    d = {}
    if path:
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    d = apply_env_overrides(d, os.environ if environ is None else environ)
    return from_dict(d)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_env_overrides(d, environ):
    d = json.loads(json.dumps(d))
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name[len(ENV_PREFIX):]:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"{name}: unknown section {section!r}")
        d.setdefault(section, {})[key] = _parse_value(raw)
    return d


def set_key(cfg, dotted, value):
    """Return a copy of ``cfg`` with ``section.key`` replaced (validated)."""
    section, key = dotted.split(".", 1)
    d = cfg.to_dict()
    if section not in d or not isinstance(d[section], dict):
        raise ConfigError(f"unknown section {section!r}")
    d[section][key] = value
    return from_dict(d)


def section_dict(obj):
    return asdict(obj) if is_dataclass(obj) else dict(obj)
