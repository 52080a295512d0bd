"""Finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from . import ops
from .classifier import ClassifierHyperparams, DirectionClassifier
from .regressor import EnvelopeRegressor, RegressorHyperparams

# Tiny instances keep the parameter sweep fast while exercising every op.
TINY_REGRESSOR = RegressorHyperparams(
    n_eeg_ch=3, n_emg_ch=2, window=20, patch=5, d_model=8, n_heads=2, n_layers=1
)
TINY_CLASSIFIER = ClassifierHyperparams(n_emg_ch=2, seq_len=10, n_filters=4)


def _regressor_loss(model: EnvelopeRegressor, x, y):
    yhat, cache = model.forward(x, want_cache=True)
    diff = yhat - y
    loss = float(np.mean(diff**2))
    dyhat = 2.0 * diff / diff.size
    return loss, cache, dyhat


def _classifier_loss(model: DirectionClassifier, x, y_idx):
    logits, cache = model.forward(x, want_cache=True)
    probs = ops.softmax(logits)
    onehot = np.eye(logits.shape[-1])[y_idx]
    loss = float(-np.mean(np.sum(onehot * np.log(probs + 1e-12), axis=1)))
    dlogits = (probs - onehot) / len(y_idx)
    return loss, cache, dlogits


def grad_check(model_kind: str, seed: int, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Uses MSE for the regressor and cross-entropy for the classifier on a
    small random batch.
    """
    rng = np.random.default_rng(seed)
    if model_kind == "regressor":
        model = EnvelopeRegressor(TINY_REGRESSOR, seed=seed)
        x = rng.standard_normal((4, TINY_REGRESSOR.n_eeg_ch, TINY_REGRESSOR.window))
        y = rng.standard_normal((4, TINY_REGRESSOR.n_emg_ch))
        loss_fn = lambda: _regressor_loss(model, x, y)
    elif model_kind == "classifier":
        model = DirectionClassifier(TINY_CLASSIFIER, seed=seed)
        x = rng.standard_normal((6, TINY_CLASSIFIER.n_emg_ch, TINY_CLASSIFIER.seq_len))
        y = rng.integers(0, TINY_CLASSIFIER.n_classes, size=6)
        loss_fn = lambda: _classifier_loss(model, x, y)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")

    loss, cache, dout = loss_fn()
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss in gradient check")
    analytic = model.backward(cache, dout)

    max_rel = 0.0
    for name, param in model.params.items():
        flat = param.ravel()
        a_flat = analytic[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn()[0]
            flat[i] = orig - eps
            lm = loss_fn()[0]
            flat[i] = orig
            numeric = (lp - lm) / (2 * eps)
            rel = abs(a_flat[i] - numeric) / max(1e-8, abs(numeric))
            max_rel = max(max_rel, rel)
    return max_rel
