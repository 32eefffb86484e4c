"""JSON model files."""

from __future__ import annotations

import json
from pathlib import Path

from ..encoding import AnchorPrior
from .forest import ForestConfig, RandomForest
from .ksvm import KernelSVM, KsvmConfig
from .mlp import MlpConfig, MLPEstimator
from .models import DeltaModel, PlainModel

FORMAT_VERSION = 1

_KINDS = {
    "mlp": (MlpConfig, MLPEstimator),
    "forest": (ForestConfig, RandomForest),
    "ksvm": (KsvmConfig, KernelSVM),
}


def model_to_dict(model) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "learner": model.learner,
        "task": model.task,
        "input_dim": model.input_dim,
        "n_outputs": model.n_outputs,
        "default_output": model.default_output,
        "config": model.config.to_dict(),
        "parameters": model.estimator.to_dict(),
    }
    if isinstance(model, DeltaModel):
        out["scheme"] = model.scheme.value
        out["prior"] = model.prior.to_dict()
    else:
        out["scheme"] = None
    return out


def model_from_dict(d: dict):
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    cfg_cls, est_cls = _KINDS[d["learner"]]
    cfg = cfg_cls(**d["config"])
    est = est_cls.from_dict(d["parameters"])
    if d["scheme"] is None:
        return PlainModel(d["learner"], est, d["input_dim"], d["n_outputs"], d["task"],
                          cfg, d["default_output"])
    prior = AnchorPrior.from_dict(d["prior"])
    if prior.fingerprint() != d["prior"]["fingerprint"]:
        raise ValueError("anchor prior data does not match its stored fingerprint")
    return DeltaModel(d["learner"], est, d["scheme"], d["input_dim"], d["n_outputs"],
                      d["task"], cfg, prior, d["default_output"])


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
