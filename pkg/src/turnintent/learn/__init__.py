from .forest import RandomForest, RandomForestConfig, fit_random_forest, select_features
from .gbt import GbtConfig, fit_gbt
from .model import Standardizer, TrainedModel, predict
from .svm import BinarySvm, SvmConfig, fit_svm

__all__ = [
    "BinarySvm",
    "GbtConfig",
    "RandomForest",
    "RandomForestConfig",
    "Standardizer",
    "SvmConfig",
    "TrainedModel",
    "fit_gbt",
    "fit_random_forest",
    "fit_svm",
    "predict",
    "select_features",
]
