"""Run configuration: a YAML document validated against a strict schema.

Unknown keys are rejected so typos fail loudly. Command-line flags override
file values; every value has a default, so the file is optional.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .errors import ConfigError

SCHEMA = {
    "seed": int,
    "jobs": int,
    "out": str,
    "split": str,
    "taps": list,
    "dataset": {
        "source": str,
        "path": str,
        "sbm": {
            "num_nodes": int,
            "num_classes": int,
            "p_in": float,
            "p_out": float,
            "feature_dim": int,
            "feature_shift": float,
        },
    },
    "train": {
        "arch": str,
        "hidden_dim": int,
        "epochs": int,
        "learning_rate": float,
        "dropout_p": float,
        "optimizer": str,
    },
    "embed": {
        "walks_per_node": int,
        "walk_length": int,
        "p": float,
        "q": float,
        "window": int,
        "embedding_dim": int,
        "negatives": int,
        "epochs": int,
        "lr": float,
    },
    "rbm": {
        "hidden_units": int,
        "epochs": int,
        "batch_size": int,
        "cd_steps": int,
        "lr": float,
        "gibbs_rounds": int,
    },
    "noise": {
        "x_kind": str,
        "a_kind": str,
        "val_pool": str,
        "test_pool": str,
    },
    "tsne": {
        "perplexity": float,
        "iterations": int,
        "learning_rate": float,
    },
}


def _validate(node, schema, path: str) -> None:
    if not isinstance(node, dict):
        raise ConfigError(f"config section {path or '<root>'} must be a mapping")
    for key, value in node.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {where}")
        expected = schema[key]
        if isinstance(expected, dict):
            _validate(value, expected, where)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"config key {where} must be a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"config key {where} must be an integer")
        elif expected is list:
            if not isinstance(value, list):
                raise ConfigError(f"config key {where} must be a list")
        elif not isinstance(value, expected):
            raise ConfigError(f"config key {where} must be {expected.__name__}")


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    _validate(raw, SCHEMA, "")
    return raw


def section(cfg: dict, name: str) -> dict:
    return dict(cfg.get(name, {}))
