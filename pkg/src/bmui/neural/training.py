"""Training loops (Adam, early stopping), trial-level splits, evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientDataError
from ..metrics import EvalReport, build_report
from ..sessions import WindowPair
from . import ops
from .classifier import CLASS_NAMES, ClassifierHyperparams, DirectionClassifier
from .regressor import EnvelopeRegressor, RegressorHyperparams

MIN_REGRESSOR_WINDOWS = 100
MIN_SEQUENCES_PER_CLASS = 30


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    patience: int = 10

    def __post_init__(self):
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions {self.split_fractions} must sum to 1")


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        cfg = self.cfg
        self.t += 1
        b1t = 1.0 - cfg.adam_beta1**self.t
        b2t = 1.0 - cfg.adam_beta2**self.t
        for k in params:
            g = grads[k]
            self.m[k] = cfg.adam_beta1 * self.m[k] + (1 - cfg.adam_beta1) * g
            self.v[k] = cfg.adam_beta2 * self.v[k] + (1 - cfg.adam_beta2) * g**2
            mhat = self.m[k] / b1t
            vhat = self.v[k] / b2t
            params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)


def split_by_trial(
    windows: list[WindowPair], fractions, seed: int
) -> tuple[list[WindowPair], list[WindowPair], list[WindowPair]]:
    """Partition windows into train/val/test by whole trials, never by window."""
    trial_ids = sorted({w.trial_id for w in windows})
    rng = np.random.default_rng(seed)
    rng.shuffle(trial_ids)
    n = len(trial_ids)
    n_train = max(1, int(round(fractions[0] * n)))
    n_val = max(1, int(round(fractions[1] * n)))
    n_train = min(n_train, n - 2) if n >= 3 else n_train
    train_ids = set(trial_ids[:n_train])
    val_ids = set(trial_ids[n_train : n_train + n_val])
    test_ids = set(trial_ids[n_train + n_val :])
    pick = lambda ids: [w for w in windows if w.trial_id in ids]
    return pick(train_ids), pick(val_ids), pick(test_ids)


def _stack(windows: list[WindowPair]):
    x = np.stack([w.x for w in windows])
    y = np.stack([w.y for w in windows])
    return x, y


def _mse_and_grad(model: EnvelopeRegressor, x, y_std):
    yhat, cache = model.forward(x, want_cache=True)
    diff = yhat - y_std
    loss = float(np.mean(diff**2))
    dyhat = 2.0 * diff / diff.size
    return loss, cache, dyhat


def train_regressor(
    windows: list[WindowPair],
    cfg: TrainConfig,
    hp: RegressorHyperparams | None = None,
) -> tuple[EnvelopeRegressor, list[dict]]:
    """Minimize MSE with Adam; returns the best-validation-loss weights.

    Targets are standardized per channel on the training split; the stats are
    stored in the model for de-standardization at inference.
    """
    if len(windows) < MIN_REGRESSOR_WINDOWS:
        raise InsufficientDataError(
            f"need >= {MIN_REGRESSOR_WINDOWS} windows, got {len(windows)}"
        )
    if hp is None:
        n_eeg, window = windows[0].x.shape
        hp = RegressorHyperparams(
            n_eeg_ch=n_eeg, n_emg_ch=len(windows[0].y), window=window
        )
    train_w, val_w, _ = split_by_trial(windows, cfg.split_fractions, cfg.seed)
    x_train, y_train = _stack(train_w)
    x_val, y_val = _stack(val_w)

    model = EnvelopeRegressor(hp, seed=cfg.seed)
    model.set_standardization(y_train.mean(axis=0), y_train.std(axis=0))
    yt = model.standardize(y_train)
    yv = model.standardize(y_val)

    opt = Adam(model.params, cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    history: list[dict] = []
    best_val = np.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    stale = 0
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        train_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, cache, dyhat = _mse_and_grad(model, x_train[idx], yt[idx])
            grads = model.backward(cache, dyhat)
            opt.step(model.params, grads)
            train_loss += loss * len(idx)
        train_loss /= n
        val_pred = model.forward(x_val)
        val_loss = float(np.mean((val_pred - yv) ** 2))
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in model.params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.params = best_params
    return model, history


def train_classifier(
    sequences: np.ndarray,
    labels: list[str],
    cfg: TrainConfig,
    hp: ClassifierHyperparams | None = None,
) -> tuple[DirectionClassifier, list[dict]]:
    """Softmax cross-entropy training with stratified (class-balanced) batches."""
    sequences = np.asarray(sequences, dtype=np.float64)
    y_idx = np.array([CLASS_NAMES.index(lbl) for lbl in labels])
    counts = {c: int((y_idx == i).sum()) for i, c in enumerate(CLASS_NAMES)}
    missing = [c for c, n in counts.items() if n < MIN_SEQUENCES_PER_CLASS]
    if missing:
        raise InsufficientDataError(
            f"need >= {MIN_SEQUENCES_PER_CLASS} sequences per class, short: {missing} ({counts})"
        )
    if hp is None:
        hp = ClassifierHyperparams(
            n_emg_ch=sequences.shape[1], seq_len=sequences.shape[2]
        )
    rng = np.random.default_rng(cfg.seed)
    # Stratified split: hold out 20% of each class for validation.
    train_idx, val_idx = [], []
    for i in range(len(CLASS_NAMES)):
        cls = np.flatnonzero(y_idx == i)
        rng.shuffle(cls)
        n_val = max(1, len(cls) // 5)
        val_idx.extend(cls[:n_val])
        train_idx.append(cls[n_val:])
    val_idx = np.array(val_idx)

    model = DirectionClassifier(hp, seed=cfg.seed)
    opt = Adam(model.params, cfg)
    per_class = max(1, cfg.batch_size // len(CLASS_NAMES))
    n_batches = max(1, min(len(c) for c in train_idx) // per_class)
    history: list[dict] = []
    best_val = np.inf
    best_params = {k: v.copy() for k, v in model.params.items()}
    stale = 0
    for epoch in range(cfg.epochs):
        train_loss = 0.0
        for _ in range(n_batches):
            idx = np.concatenate(
                [rng.choice(cls, size=per_class, replace=False) for cls in train_idx]
            )
            logits, cache = model.forward(sequences[idx], want_cache=True)
            probs = ops.softmax(logits)
            onehot = np.eye(len(CLASS_NAMES))[y_idx[idx]]
            loss = float(-np.mean(np.sum(onehot * np.log(probs + 1e-12), axis=1)))
            dlogits = (probs - onehot) / len(idx)
            grads = model.backward(cache, dlogits)
            opt.step(model.params, grads)
            train_loss += loss
        train_loss /= n_batches
        val_logits = model.forward(sequences[val_idx])
        val_probs = ops.softmax(val_logits)
        val_onehot = np.eye(len(CLASS_NAMES))[y_idx[val_idx]]
        val_loss = float(-np.mean(np.sum(val_onehot * np.log(val_probs + 1e-12), axis=1)))
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in model.params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.params = best_params
    return model, history


def evaluate_regressor(
    model: EnvelopeRegressor, test_windows: list[WindowPair]
) -> EvalReport:
    """Per-channel SCC over concatenated test windows; t-test over per-trial
    SCCs of the best channel."""
    if not test_windows:
        raise InsufficientDataError("empty test set")
    x, y_true = _stack(test_windows)
    y_pred = np.empty_like(y_true)
    for start in range(0, len(x), 256):
        y_pred[start : start + 256] = model.predict(x[start : start + 256])
    per_channel_pred = y_pred.T
    per_channel_true = y_true.T

    # Provisional best channel from the pooled SCC, then per-trial series.
    from ..metrics import spearman

    pooled = []
    for p, t in zip(per_channel_pred, per_channel_true):
        try:
            pooled.append(spearman(p, t))
        except Exception:
            pooled.append(0.0)
    best = int(np.argmax(pooled))
    trial_ids = sorted({w.trial_id for w in test_windows})
    per_trial = []
    for tid in trial_ids:
        mask = np.array([w.trial_id == tid for w in test_windows])
        per_trial.append((y_pred[mask, best], y_true[mask, best]))
    return build_report(per_channel_pred, per_channel_true, per_trial)
