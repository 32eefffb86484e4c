"""Experiment config files: JSON documents with an ``experiment`` discriminator."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .exceptions import ConfigError

__all__ = ["CONFIG_SCHEMA", "PARAM_SCHEMAS", "load_config", "validate_config"]

_int_list = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_pos_int = {"type": "integer", "minimum": 1}
_layers = {"type": "array", "items": _pos_int, "minItems": 1}

_mlp = {
    "type": "object",
    "properties": {
        "hidden_layers": _layers,
        "activation": {"enum": ["relu", "leaky_relu"]},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "epochs": _pos_int,
        "batch_size": _pos_int,
        "standardize_targets": {"type": "boolean"},
        "negative_slope": {"type": "number"},
    },
    "additionalProperties": False,
}

_forest = {
    "type": "object",
    "properties": {
        "n_trees": _pos_int,
        "max_depth": {"type": ["integer", "null"], "minimum": 1},
        "min_samples_split": {"type": "integer", "minimum": 2},
        "anchor_replication": _pos_int,
    },
    "additionalProperties": False,
}

_ksvm = {
    "type": "object",
    "properties": {
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "C": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": _pos_int,
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "anchor_replication": _pos_int,
    },
    "additionalProperties": False,
}

_schemes = {"type": "array", "items": {"enum": ["identity", "single", "double", "x", "x-r", "x-r1-r2"]},
            "minItems": 1}

_dataset = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"path": {"type": "string"}, "target": {"type": ["string", "integer"]}},
            "required": ["path"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"benchmark": {"type": "string"}, "dim": _pos_int, "n": _pos_int},
            "required": ["benchmark"],
            "additionalProperties": False,
        },
    ]
}

_moons = {
    "n_train": _pos_int,
    "noise": {"type": "number", "minimum": 0},
    "n_test": _pos_int,
    "mlp": _mlp,
}


def _obj(props):
    return {"type": "object", "properties": props, "additionalProperties": False}


PARAM_SCHEMAS = {
    "regression-calibration": _obj({
        "dataset": _dataset,
        "n_train": _pos_int,
        "forest": _forest,
        "anchors_k": _pos_int,
        "ensemble_m": {"type": "integer", "minimum": 2},
    }),
    "encoding-ablation": _obj({
        "benchmarks": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "dim": _pos_int,
        "n_total": _pos_int,
        "n_train": _pos_int,
        "schemes": _schemes,
        "forest": _forest,
        "anchors_k": _pos_int,
    }),
    "smo": _obj({
        "objective": {"type": "string"},
        "n_init": {"type": "integer", "minimum": 2},
        "n_iterations": {"type": "integer", "minimum": 0},
        "pool_size": _pos_int,
        "anchors_k": _pos_int,
        "refit_epochs": _pos_int,
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": _pos_int,
        "hidden_layers": _layers,
        "warm_start": {"type": "boolean"},
    }),
    "mbo": _obj({
        "task": _obj({
            "input_dim": _pos_int,
            "latent_dim": _pos_int,
            "n_train": _pos_int,
            "cap_fraction": {"type": "number", "exclusiveMinimum": 0},
            "target_fractions": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "shape_dim": {"type": "integer", "minimum": 0},
            "shape_scale": {"type": "number", "minimum": 0},
            "basis_seed": {"type": "integer", "minimum": 0},
        }),
        "anchors_k": {"type": "integer", "minimum": 2},
        "restarts": _pos_int,
        "iters": _pos_int,
        "step": {"type": "number", "exclusiveMinimum": 0},
        "forward": _mlp,
        "inverse": _mlp,
    }),
    "ood": _obj({
        **_moons,
        "n_ood": _pos_int,
        "inflate": {"type": "number", "exclusiveMinimum": 0},
        "anchors_k": _pos_int,
        "t_min": {"type": "number", "minimum": 0, "maximum": 0.5},
    }),
    "calibration-shift": _obj({
        **_moons,
        "kind": {"enum": ["gaussian", "uniform", "shift"]},
        "intensities": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 5},
                        "minItems": 1},
        "anchors_k": _pos_int,
        "bins": _pos_int,
        "t_min": {"type": "number", "minimum": 0, "maximum": 0.5},
    }),
    "anchor-ablation": _obj({
        **_moons,
        "kind": {"enum": ["gaussian", "uniform", "shift"]},
        "intensity": {"type": "integer", "minimum": 1, "maximum": 5},
        "k_values": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
    }),
    "ksvm-demo": _obj({
        "centers": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                               "minItems": 2, "maxItems": 2}, "minItems": 2},
        "n": _pos_int,
        "sd": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "integer", "minimum": 2},
        "bounds": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                              "minItems": 2, "maxItems": 2},
                   "minItems": 2, "maxItems": 2},
        "anchors_k": {"type": "integer", "minimum": 2},
        "ksvm": _ksvm,
    }),
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": sorted(PARAM_SCHEMAS)},
        "seeds": {**_int_list, "items": {"type": "integer", "minimum": 0}},
        "params": {"type": "object"},
        "out": {"type": "string"},
        "description": {"type": "string"},
    },
    "required": ["experiment", "seeds"],
    "additionalProperties": False,
}


def _path(prefix, error) -> str:
    parts = [*prefix, *error.absolute_path]
    return ".".join(str(p) for p in parts) or "<root>"


def _check(instance, schema, prefix=()):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = _path(prefix, err)
        raise ConfigError(err.message, path=path)


def validate_config(cfg: dict) -> dict:
    """Check a parsed config; returns it unchanged. Raises ConfigError."""
    _check(cfg, CONFIG_SCHEMA)
    params = cfg.get("params", {})
    _check(params, PARAM_SCHEMAS[cfg["experiment"]], ("params",))
    dataset = params.get("dataset", {})
    if "path" in dataset and not Path(dataset["path"]).is_file():
        raise ConfigError(f"file not found: {dataset['path']}", path="params.dataset.path")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", path=str(path))
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return validate_config(cfg)
