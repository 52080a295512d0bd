"""From-scratch differentiable models: window regressor, direction classifier."""

from .classifier import CLASS_NAMES, ClassifierHyperparams, DirectionClassifier
from .gradcheck import grad_check
from .io import load_model, save_model
from .regressor import EnvelopeRegressor, RegressorHyperparams
from .training import (
    TrainConfig,
    evaluate_regressor,
    split_by_trial,
    train_classifier,
    train_regressor,
)

__all__ = [
    "CLASS_NAMES",
    "ClassifierHyperparams",
    "DirectionClassifier",
    "EnvelopeRegressor",
    "RegressorHyperparams",
    "TrainConfig",
    "evaluate_regressor",
    "grad_check",
    "load_model",
    "save_model",
    "split_by_trial",
    "train_classifier",
    "train_regressor",
]
