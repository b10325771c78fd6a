"""
===============================================================================
RUN CONFIGURATION - DEFAULTS, CONFIG FILES, ENVIRONMENT OVERRIDES
===============================================================================

Purpose:
    Centralizes every configurable value of a run:
      - Default dictionaries for the model, training, data and CLI settings
      - Flat KEY=VALUE config files (python-dotenv syntax, '#' comments)
      - Environment overrides with the TRAJPRED_ prefix (a .env file in the
        working directory is loaded first)
      - RunConfig: the resolved, validated settings of one CLI invocation

Precedence (lowest -> highest):
    defaults  <  config file  <  TRAJPRED_<KEY> environment  <  CLI flags

Config file schema:
    Keys are the lower-case field names of ModelConfig, TrainConfig or
    DataConfig. Values:
      - ints / floats as written
      - booleans: true/false, yes/no, 1/0
      - width tuples (pose_mlp, goal_mlp, traj_mlp): "2,8,32"
      - name lists (sdd_keep_classes, sdd_drop_flags): "Pedestrian,Biker"
      - crop_sizes_by_class: "Pedestrian:64,Biker:96"

    Example model.cfg:
        # patch variant, small crops
        backbone=patch
        crop_size=32
        patch_size=8

Notes:
    - Unknown keys in a config file raise ConfigError; unknown TRAJPRED_
      variables are ignored.
    - Values are validated by the frozen config dataclasses themselves.

===============================================================================
"""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from data.config import DataConfig
from model.config import ModelConfig
from training.config import TrainConfig
from util.errors_util import ConfigError, PathError

ENV_PREFIX = "TRAJPRED_"

COMMANDS = ("prepare", "train", "eval", "baseline", "gradcheck", "plot")
FORMATS = ("eth_ucy", "sdd")

# =============================================================================
# DEFAULTS
# =============================================================================
MODEL_DEFAULTS: Dict[str, Any] = ModelConfig().to_dict()
TRAIN_DEFAULTS: Dict[str, Any] = TrainConfig().to_dict()
DATA_DEFAULTS: Dict[str, Any] = DataConfig().to_dict()
RUN_DEFAULTS: Dict[str, Any] = {
    "command": None,
    "dataset_roots": (),
    "split": "loocv",
    "model_config": None,
    "train_config": None,
    "data_config": None,
    "out": "runs",
    "seed": None,
    "precision": None,
    "backbone": None,
    "scenes": None,
    "checkpoint": None,
    "baseline": "linear",
    "format": "eth_ucy",
    "log_level": "INFO",
    "dump_crops": 0,
}

# Keys whose values are lists of names rather than integers
NAME_LIST_KEYS = {"sdd_keep_classes", "sdd_drop_flags"}
# Keys holding label:size pairs
PAIR_KEYS = {"crop_sizes_by_class"}

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


def coerce(key: str, value: Any, defaults: Mapping[str, Any]):
    """Convert a raw string to the type of `defaults[key]`; non-strings pass through."""
    if not isinstance(value, str):
        return value
    text = value.strip()
    default = defaults[key]
    try:
        if key in PAIR_KEYS:
            pairs = []
            for item in filter(None, (p.strip() for p in text.split(","))):
                label, _, side = item.partition(":")
                pairs.append((label.strip(), int(side)))
            return tuple(pairs)
        if key in NAME_LIST_KEYS:
            return tuple(p.strip() for p in text.split(",") if p.strip())
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in TRUE_WORDS:
                return True
            if lowered in FALSE_WORDS:
                return False
            raise ValueError(text)
        if isinstance(default, (list, tuple)):
            return tuple(int(p) for p in text.split(",") if p.strip())
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for '{key}': '{value}'")
    return text


def load_environment(env_file: str = ".env") -> bool:
    """Load a .env file from the working directory, if present."""
    if os.path.exists(env_file):
        load_dotenv(env_file)
        return True
    return False


def read_config_file(path, defaults: Mapping[str, Any]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise PathError([path])
    values = {}
    for key, raw in dotenv_values(path).items():
        name = key.strip().lower()
        if name not in defaults:
            raise ConfigError(f"{path}: unknown key '{key}' (known: {', '.join(sorted(defaults))})")
        if raw is None:
            raise ConfigError(f"{path}: key '{key}' has no value")
        values[name] = coerce(name, raw, defaults)
    return values


def environment_values(defaults: Mapping[str, Any], environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    values = {}
    for key in defaults:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None and raw != "":
            values[key] = coerce(key, raw, defaults)
    return values


def resolve_values(
    defaults: Mapping[str, Any],
    path=None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> Dict[str, Any]:
    values = dict(defaults)
    if path is not None:
        values.update(read_config_file(path, defaults))
    values.update(environment_values(defaults, environ))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in defaults:
            raise ConfigError(f"unknown override '{key}'")
        values[key] = coerce(key, value, defaults)
    return values


def _build(cls, values: Dict[str, Any]):
    try:
        return cls.from_dict(values)
    except TypeError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}")


def load_model_config(path=None, overrides=None, environ=None) -> ModelConfig:
    return _build(ModelConfig, resolve_values(MODEL_DEFAULTS, path, overrides, environ))


def load_train_config(path=None, overrides=None, environ=None) -> TrainConfig:
    return _build(TrainConfig, resolve_values(TRAIN_DEFAULTS, path, overrides, environ))


def load_data_config(path=None, overrides=None, environ=None) -> DataConfig:
    return _build(DataConfig, resolve_values(DATA_DEFAULTS, path, overrides, environ))


# =============================================================================
# RUN CONFIG
# =============================================================================
@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one CLI invocation; recorded next to its outputs."""

    command: str
    dataset_roots: Tuple[str, ...] = ()
    split: str = "loocv"
    model_config: Optional[str] = None
    train_config: Optional[str] = None
    data_config: Optional[str] = None
    out: str = "runs"
    seed: Optional[int] = None
    precision: Optional[str] = None
    backbone: Optional[str] = None
    scenes: Optional[str] = None
    checkpoint: Optional[str] = None
    baseline: str = "linear"
    format: str = "eth_ucy"
    log_level: str = "INFO"
    dump_crops: int = 0
    env: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}' (expected one of {COMMANDS})")
        if self.format not in FORMATS:
            raise ConfigError(f"unknown dataset format '{self.format}' (expected one of {FORMATS})")
        if self.dump_crops < 0:
            raise ConfigError(f"dump_crops must be >= 0, got {self.dump_crops}")
        missing = [
            Path(p)
            for p in (*self.dataset_roots, self.model_config, self.train_config, self.data_config,
                      self.scenes, self.checkpoint)
            if p is not None and not Path(p).exists()
        ]
        if missing:
            raise PathError(missing)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def model(self) -> ModelConfig:
        return load_model_config(self.model_config, {"backbone": self.backbone})

    def train(self) -> TrainConfig:
        return load_train_config(self.train_config, {"seed": self.seed, "precision": self.precision})

    def data(self) -> DataConfig:
        return load_data_config(self.data_config)

    def effective_seed(self) -> int:
        return self.seed if self.seed is not None else self.train().seed

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["dataset_roots"] = list(self.dataset_roots)
        return d

    def settings(self) -> Dict[str, Any]:
        """to_dict() without filesystem locations; safe to embed in checkpoints."""
        d = self.to_dict()
        for key in RUN_PATH_KEYS:
            d.pop(key, None)
        return d


RUN_INT_KEYS = {"seed", "dump_crops"}
RUN_PATH_KEYS = ("dataset_roots", "model_config", "train_config", "data_config", "out", "scenes", "checkpoint", "env")


def _run_env_value(key: str, raw: str):
    if key == "dataset_roots":
        return tuple(p for p in raw.split(os.pathsep) if p)
    if key in RUN_INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"bad value for '{ENV_PREFIX}{key.upper()}': '{raw}'")
    return raw


def make_run_config(command: str, environ: Optional[Mapping[str, str]] = None, **values) -> RunConfig:
    """Build a RunConfig from flag values; None flags fall back to env, then defaults."""
    environ = os.environ if environ is None else environ
    merged = {k: v for k, v in RUN_DEFAULTS.items() if k != "command"}
    for key in merged:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw:
            merged[key] = _run_env_value(key, raw)
    for key, value in values.items():
        if key not in merged:
            raise ConfigError(f"unknown run setting '{key}'")
        if value is not None:
            merged[key] = value
    merged["dataset_roots"] = tuple(str(p) for p in merged["dataset_roots"] or ())
    recorded_env = {k: v for k, v in environ.items() if k.startswith(ENV_PREFIX)}
    return RunConfig(command=command, env=recorded_env, **merged)


def write_run_record(run_config: RunConfig, out_dir, **extra) -> Path:
    """Store the RunConfig (plus resolved settings) as <out_dir>/run_config.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {"run": run_config.to_dict(), **extra}
    path = out_dir / "run_config.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=str), encoding="utf-8")
    return path
