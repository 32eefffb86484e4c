from ..functions import Dataset
from .forest import ForestConfig, RandomForest, RegressionTree
from .io import load_model, model_from_dict, model_to_dict, save_model
from .ksvm import KernelSVM, KsvmConfig
from .mlp import Adam, MlpConfig, MLPNetwork
from .models import (
    DeltaModel,
    EnsembleModel,
    PlainModel,
    train_anchored_forest,
    train_anchored_ksvm,
    train_anchored_mlp,
    train_baseline,
)

__all__ = [
    "Adam",
    "Dataset",
    "DeltaModel",
    "EnsembleModel",
    "ForestConfig",
    "KernelSVM",
    "KsvmConfig",
    "MLPNetwork",
    "MlpConfig",
    "PlainModel",
    "RandomForest",
    "RegressionTree",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "save_model",
    "train_anchored_forest",
    "train_anchored_ksvm",
    "train_anchored_mlp",
    "train_baseline",
]
