"""CNN over predicted-envelope sequences -> {flex, extend, rest} logits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops

CLASS_NAMES = ("flex", "extend", "rest")


@dataclass(frozen=True)
class ClassifierHyperparams:
    n_emg_ch: int = 12
    seq_len: int = 10  # control steps per decision (500 ms at 50 ms steps)
    n_filters: int = 16
    kernel: int = 3
    n_classes: int = 3


def _conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded 1-D convolution; x [B, C, T], w [F, C, K]."""
    k = w.shape[2]
    pad = k // 2
    t = x.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    xs = np.stack([xp[:, :, i : i + t] for i in range(k)], axis=-1)  # [B,C,T,K]
    y = np.einsum("bctk,fck->bft", xs, w) + b[None, :, None]
    return y, xs


def _conv1d_backward(dy: np.ndarray, xs: np.ndarray, w: np.ndarray):
    dw = np.einsum("bctk,bft->fck", xs, dy)
    db = dy.sum(axis=(0, 2))
    dxs = np.einsum("bft,fck->bctk", dy, w)
    b, c, t, k = dxs.shape
    pad = k // 2
    dxp = np.zeros((b, c, t + 2 * pad))
    for i in range(k):
        dxp[:, :, i : i + t] += dxs[:, :, :, i]
    return dxp[:, :, pad : pad + t], dw, db


class DirectionClassifier:
    kind = "classifier"

    def __init__(self, hp: ClassifierHyperparams, seed: int = 0):
        self.hp = hp
        self.params: dict[str, np.ndarray] = {}
        self._init_params(seed)

    def _init_params(self, seed: int):
        rng = np.random.default_rng(seed)
        hp = self.hp

        def w(shape, fan_in):
            return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)

        p = self.params
        p["conv1.W"] = w((hp.n_filters, hp.n_emg_ch, hp.kernel), hp.n_emg_ch * hp.kernel)
        p["conv1.b"] = np.zeros(hp.n_filters)
        p["conv2.W"] = w((hp.n_filters, hp.n_filters, hp.kernel), hp.n_filters * hp.kernel)
        p["conv2.b"] = np.zeros(hp.n_filters)
        p["head.W"] = w((hp.n_filters, hp.n_classes), hp.n_filters)
        p["head.b"] = np.zeros(hp.n_classes)

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Logits [B, n_classes] from envelope sequences [B, C, T]."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        hp = self.hp
        if x.shape[1] != hp.n_emg_ch or x.shape[2] != hp.seq_len:
            raise ValueError(f"input shape {x.shape} != (*, {hp.n_emg_ch}, {hp.seq_len})")
        p = self.params
        c1, xs1 = _conv1d(x, p["conv1.W"], p["conv1.b"])
        a1, t1 = ops.gelu_forward(c1)
        c2, xs2 = _conv1d(a1, p["conv2.W"], p["conv2.b"])
        a2, t2 = ops.gelu_forward(c2)
        pool = a2.mean(axis=2)
        logits = ops.linear(pool, p["head.W"], p["head.b"])
        ops.assert_finite("classifier logits", logits)
        cache = {"c1": c1, "t1": t1, "xs1": xs1, "c2": c2, "t2": t2, "xs2": xs2, "a2": a2, "pool": pool}
        out = logits[0] if squeeze else logits
        return (out, cache) if want_cache else out

    def backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        grads = {}
        dpool, grads["head.W"], grads["head.b"] = ops.linear_backward(
            dlogits, cache["pool"], p["head.W"]
        )
        t = cache["a2"].shape[2]
        da2 = np.repeat(dpool[:, :, None], t, axis=2) / t
        dc2 = da2 * ops.gelu_backward(cache["c2"], cache["t2"])
        da1, grads["conv2.W"], grads["conv2.b"] = _conv1d_backward(
            dc2, cache["xs2"], p["conv2.W"]
        )
        dc1 = da1 * ops.gelu_backward(cache["c1"], cache["t1"])
        _, grads["conv1.W"], grads["conv1.b"] = _conv1d_backward(
            dc1, cache["xs1"], p["conv1.W"]
        )
        return grads

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        return ops.softmax(self.forward(x))

    def predict_direction(self, x: np.ndarray) -> str:
        return CLASS_NAMES[int(np.argmax(self.forward(x)))]
