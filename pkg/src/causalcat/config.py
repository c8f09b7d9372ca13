"""Run configuration: YAML file, dotted-key overrides, defaults.

Precedence is command-line flags over the config file over built-in defaults.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Mapping

import yaml

from causalcat.errors import ConfigError

BASELINE_MODELS = ("logreg", "cnn_lstm")
TRAIN_COMPOSITIONS = ("crawled", "sdcnl_train", "both")

DEFAULTS: dict[str, Any] = {
    "data": {
        "crawled": None,
        "sdcnl_train": None,
        "sdcnl_test": None,
        "text_column": "text",
        "label_column": "label",
        "label_encoding": "integer_codes",
        "id_column": None,
    },
    "train_composition": "both",
    "balance": {"classes": [1, 2, 3], "n": 120, "seed": None},
    "dev_fraction": 0.1,
    "model": "logreg",
    "backend_checkpoint": None,
    "seed": 0,
    "baseline": {
        "epochs": 30,
        "batch_size": 16,
        "early_stop_patience": 3,
        "min_frequency": 2,
    },
    "logreg": {"learning_rate": 1e-2, "l2_strength": 1.0, "sublinear_tf": False},
    "cnn_lstm": {
        "learning_rate": 1e-3,
        "embedding_dim": 128,
        "n_filters": 64,
        "kernel_width": 5,
        "pool_width": 2,
        "hidden_size": 64,
        "max_len": 256,
    },
    "finetune": {
        "max_len": 256,
        "learning_rate": 5e-5,
        "batch_size": 16,
        "epochs": 4,
        "pooling": None,
        "accumulation_steps": 1,
    },
    "stats": {"raw": False},
    "cache": None,
}


def _merge(base: dict, update: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def set_dotted(config: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = config
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = child
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def get_dotted(config: Mapping, dotted: str) -> Any:
    node: Any = config
    for part in dotted.split("."):
        node = node[part]
    return node


def parse_scalar(text: str) -> Any:
    """Interpret an override string the way YAML would (numbers, booleans, null, lists)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> dict:
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid config: {exc}") from None
        if not isinstance(loaded, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        config = _merge(config, loaded)
    for key, value in (overrides or {}).items():
        set_dotted(config, key, value)
    validate(config)
    return config


def validate(config: Mapping) -> None:
    if config["train_composition"] not in TRAIN_COMPOSITIONS:
        raise ConfigError(
            f"train_composition must be one of {TRAIN_COMPOSITIONS}, got {config['train_composition']!r}"
        )
    if not 0.0 < float(config["dev_fraction"]) < 1.0:
        raise ConfigError("dev_fraction must lie in (0, 1)")
