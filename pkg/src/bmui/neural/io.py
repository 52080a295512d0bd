"""Model serialization: structured text, exact round trip."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import CorruptModelError
from .classifier import ClassifierHyperparams, DirectionClassifier
from .regressor import EnvelopeRegressor, RegressorHyperparams

MODEL_FORMAT = "bmui-model/1"


def save_model(model, path):
    """Write a model as JSON: header, hyperparams, stats, named weight blocks.

    Floats are serialized with shortest round-trip repr, so a reloaded model
    produces bit-identical forward outputs.
    """
    doc = {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "hyperparams": asdict(model.hp),
        "weights": {k: v.tolist() for k, v in model.params.items()},
    }
    if model.kind == "regressor":
        doc["standardization"] = {
            "mean": model.y_mean.tolist(),
            "std": model.y_std.tolist(),
        }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptModelError(f"{path.name}: unreadable ({e})") from e
    if doc.get("format") != MODEL_FORMAT:
        raise CorruptModelError(
            f"{path.name}: format {doc.get('format')!r}, expected {MODEL_FORMAT!r}"
        )
    kind = doc.get("kind")
    try:
        if kind == "regressor":
            hp = RegressorHyperparams(**doc["hyperparams"])
            model = EnvelopeRegressor(hp, seed=0)
            std = doc["standardization"]
            model.set_standardization(np.array(std["mean"]), np.array(std["std"]))
        elif kind == "classifier":
            hp = ClassifierHyperparams(**doc["hyperparams"])
            model = DirectionClassifier(hp, seed=0)
        else:
            raise CorruptModelError(f"{path.name}: unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptModelError(f"{path.name}: bad hyperparams ({e})") from e

    weights = doc.get("weights", {})
    if set(weights) != set(model.params):
        raise CorruptModelError(
            f"{path.name}: weight blocks {sorted(weights)} != expected {sorted(model.params)}"
        )
    for name, expected in model.params.items():
        arr = np.asarray(weights[name], dtype=np.float64)
        if arr.shape != expected.shape:
            raise CorruptModelError(
                f"{path.name}: {name} shape {arr.shape}, expected {expected.shape}"
            )
        model.params[name] = arr
    return model
