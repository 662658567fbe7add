from .impurity import build_bins, gini, variance_impurity
from .model import (
    MODEL_VERSION,
    CorruptModelError,
    ForestConfig,
    ForestError,
    ForestModel,
    bootstrap_indices,
    load_model,
    loads_model,
    predict,
    save_model,
    train,
)
from .rng import SplitMix64, derive_seed

__all__ = [
    "MODEL_VERSION",
    "CorruptModelError",
    "ForestConfig",
    "ForestError",
    "ForestModel",
    "SplitMix64",
    "bootstrap_indices",
    "build_bins",
    "derive_seed",
    "gini",
    "load_model",
    "loads_model",
    "predict",
    "save_model",
    "train",
    "variance_impurity",
]
