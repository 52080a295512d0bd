"""Sliding-window encoder that regresses EMG envelopes from EEG windows.

Architecture: per-window patch embedding, fixed sinusoidal positions, a stack
of self-attention encoder layers (post-norm residuals, GELU feed-forward),
mean-pool over tokens, linear head. Targets are standardized per channel
during training; :meth:`predict` de-standardizes and clamps at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops


@dataclass(frozen=True)
class RegressorHyperparams:
    n_eeg_ch: int = 16
    n_emg_ch: int = 12
    window: int = 200  # samples per window
    patch: int = 10  # samples per token
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2

    def __post_init__(self):
        if self.window % self.patch != 0:
            raise ValueError(f"window {self.window} not divisible by patch {self.patch}")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")

    @property
    def n_tokens(self) -> int:
        return self.window // self.patch

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def ff_dim(self) -> int:
        return 4 * self.d_model


class EnvelopeRegressor:
    kind = "regressor"

    def __init__(self, hp: RegressorHyperparams, seed: int = 0):
        self.hp = hp
        self.params: dict[str, np.ndarray] = {}
        self.y_mean = np.zeros(hp.n_emg_ch)
        self.y_std = np.ones(hp.n_emg_ch)
        self._posenc = ops.sinusoidal_positions(hp.n_tokens, hp.d_model)
        self._init_params(seed)

    def _init_params(self, seed: int):
        rng = np.random.default_rng(seed)
        hp = self.hp

        def w(shape):
            return rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)

        p = self.params
        p["embed.W"] = w((hp.n_eeg_ch * hp.patch, hp.d_model))
        p["embed.b"] = np.zeros(hp.d_model)
        for layer in range(hp.n_layers):
            pre = f"l{layer}."
            for name in ("Wq", "Wk", "Wv", "Wo"):
                p[pre + f"attn.{name}"] = w((hp.d_model, hp.d_model))
            # No key bias: softmax is invariant to a per-row score shift, so a
            # key bias is a no-op with an identically zero gradient.
            for name in ("bq", "bv", "bo"):
                p[pre + f"attn.{name}"] = np.zeros(hp.d_model)
            p[pre + "ln1.g"] = np.ones(hp.d_model)
            p[pre + "ln1.b"] = np.zeros(hp.d_model)
            p[pre + "ff.W1"] = w((hp.d_model, hp.ff_dim))
            p[pre + "ff.b1"] = np.zeros(hp.ff_dim)
            p[pre + "ff.W2"] = w((hp.ff_dim, hp.d_model))
            p[pre + "ff.b2"] = np.zeros(hp.d_model)
            p[pre + "ln2.g"] = np.ones(hp.d_model)
            p[pre + "ln2.b"] = np.zeros(hp.d_model)
        p["head.W"] = w((hp.d_model, hp.n_emg_ch))
        p["head.b"] = np.zeros(hp.n_emg_ch)

    # -- forward / backward -------------------------------------------------

    def _to_tokens(self, x: np.ndarray) -> np.ndarray:
        """[B, C, W] -> [B, T, C*P]: contiguous patches, channels interleaved."""
        b, c, w = x.shape
        hp = self.hp
        if c != hp.n_eeg_ch or w != hp.window:
            raise ValueError(f"input shape {x.shape} != (*, {hp.n_eeg_ch}, {hp.window})")
        return (
            x.reshape(b, c, hp.n_tokens, hp.patch)
            .transpose(0, 2, 1, 3)
            .reshape(b, hp.n_tokens, c * hp.patch)
        )

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """Standardized-space prediction [B, n_emg_ch]; cache for backward."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        hp = self.hp
        p = self.params
        tokens = self._to_tokens(x)
        h = ops.linear(tokens, p["embed.W"], p["embed.b"]) + self._posenc[None]
        cache = {"tokens": tokens, "layers": []}
        scale = 1.0 / np.sqrt(hp.head_dim)
        for layer in range(hp.n_layers):
            pre = f"l{layer}."
            a_in = h
            q = ops.linear(h, p[pre + "attn.Wq"], p[pre + "attn.bq"])
            k = h @ p[pre + "attn.Wk"]
            v = ops.linear(h, p[pre + "attn.Wv"], p[pre + "attn.bv"])
            qh, kh, vh = (self._split_heads(m) for m in (q, k, v))
            scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
            attn = ops.softmax(scores)
            ctx = self._merge_heads(attn @ vh)
            attn_out = ops.linear(ctx, p[pre + "attn.Wo"], p[pre + "attn.bo"])
            r1 = a_in + attn_out
            h1, ln1_cache = ops.layer_norm(r1, p[pre + "ln1.g"], p[pre + "ln1.b"])
            f1 = ops.linear(h1, p[pre + "ff.W1"], p[pre + "ff.b1"])
            f1g, f1t = ops.gelu_forward(f1)
            f2 = ops.linear(f1g, p[pre + "ff.W2"], p[pre + "ff.b2"])
            r2 = h1 + f2
            h, ln2_cache = ops.layer_norm(r2, p[pre + "ln2.g"], p[pre + "ln2.b"])
            cache["layers"].append(
                {
                    "a_in": a_in,
                    "qh": qh,
                    "kh": kh,
                    "vh": vh,
                    "attn": attn,
                    "ctx": ctx,
                    "ln1": ln1_cache,
                    "h1": h1,
                    "f1": f1,
                    "f1t": f1t,
                    "f1g": f1g,
                    "ln2": ln2_cache,
                }
            )
        pool = h.mean(axis=1)
        yhat = ops.linear(pool, p["head.W"], p["head.b"])
        ops.assert_finite("regressor output", yhat)
        cache["pool"] = pool
        out = yhat[0] if squeeze else yhat
        return (out, cache) if want_cache else out

    def _split_heads(self, m: np.ndarray) -> np.ndarray:
        b, t, _ = m.shape
        hp = self.hp
        return m.reshape(b, t, hp.n_heads, hp.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, m: np.ndarray) -> np.ndarray:
        b, _, t, _ = m.shape
        return m.transpose(0, 2, 1, 3).reshape(b, t, self.hp.d_model)

    def backward(self, cache, dyhat: np.ndarray) -> dict[str, np.ndarray]:
        """Analytic parameter gradients given d(loss)/d(standardized output)."""
        hp = self.hp
        p = self.params
        grads = {name: np.zeros_like(val) for name, val in p.items()}
        t_tok = hp.n_tokens
        scale = 1.0 / np.sqrt(hp.head_dim)

        dpool, grads["head.W"], grads["head.b"] = ops.linear_backward(
            dyhat, cache["pool"], p["head.W"]
        )
        dh = np.repeat(dpool[:, None, :], t_tok, axis=1) / t_tok

        for layer in reversed(range(hp.n_layers)):
            pre = f"l{layer}."
            lc = cache["layers"][layer]
            dr2, grads[pre + "ln2.g"], grads[pre + "ln2.b"] = ops.layer_norm_backward(
                dh, lc["ln2"]
            )
            dh1 = dr2.copy()
            df2 = dr2
            df1g, grads[pre + "ff.W2"], grads[pre + "ff.b2"] = ops.linear_backward(
                df2, lc["f1g"], p[pre + "ff.W2"]
            )
            df1 = df1g * ops.gelu_backward(lc["f1"], lc["f1t"])
            dh1_ff, grads[pre + "ff.W1"], grads[pre + "ff.b1"] = ops.linear_backward(
                df1, lc["h1"], p[pre + "ff.W1"]
            )
            dh1 += dh1_ff
            dr1, grads[pre + "ln1.g"], grads[pre + "ln1.b"] = ops.layer_norm_backward(
                dh1, lc["ln1"]
            )
            da_in = dr1.copy()
            dattn_out = dr1
            dctx, grads[pre + "attn.Wo"], grads[pre + "attn.bo"] = ops.linear_backward(
                dattn_out, lc["ctx"], p[pre + "attn.Wo"]
            )
            dctx_h = self._split_heads(dctx)
            dattn = dctx_h @ lc["vh"].transpose(0, 1, 3, 2)
            dvh = lc["attn"].transpose(0, 1, 3, 2) @ dctx_h
            dscores = ops.softmax_backward(dattn, lc["attn"]) * scale
            dqh = dscores @ lc["kh"]
            dkh = dscores.transpose(0, 1, 3, 2) @ lc["qh"]
            dq, dk, dv = (self._merge_heads(m) for m in (dqh, dkh, dvh))
            for name, dm in (("q", dq), ("k", dk), ("v", dv)):
                dx, dw, db = ops.linear_backward(
                    dm, lc["a_in"], p[pre + f"attn.W{name}"]
                )
                grads[pre + f"attn.W{name}"] = dw
                if name != "k":
                    grads[pre + f"attn.b{name}"] = db
                da_in += dx
            dh = da_in

        dtokens = dh @ p["embed.W"].T  # noqa: F841  (input grads unused)
        grads["embed.W"] = np.tensordot(cache["tokens"], dh, axes=([0, 1], [0, 1]))
        grads["embed.b"] = dh.reshape(-1, hp.d_model).sum(axis=0)
        return grads

    # -- inference ----------------------------------------------------------

    def set_standardization(self, mean: np.ndarray, std: np.ndarray):
        self.y_mean = np.asarray(mean, dtype=np.float64).copy()
        std = np.asarray(std, dtype=np.float64).copy()
        std[std == 0] = 1.0
        self.y_std = std

    def standardize(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std

    def destandardize(self, y: np.ndarray) -> np.ndarray:
        return y * self.y_std + self.y_mean

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Envelope prediction in physical units, clamped at zero."""
        return np.maximum(self.destandardize(self.forward(x)), 0.0)
