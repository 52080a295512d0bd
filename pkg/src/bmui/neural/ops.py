"""Primitive differentiable ops used by both models.

Every forward returns whatever the matching backward needs; no autograd tape,
gradients are assembled explicitly by the model classes.
"""

from __future__ import annotations

import numpy as np

LAYER_NORM_EPS = 1e-5

_GELU_C = np.sqrt(2.0 / np.pi)
_GELU_A = 0.044715


def gelu_forward(x: np.ndarray):
    """Tanh-based smooth GELU; returns (y, tanh term) for reuse in backward."""
    x2 = x * x
    t = np.tanh(_GELU_C * x * (1.0 + _GELU_A * x2))
    return 0.5 * x * (1.0 + t), t


def gelu(x: np.ndarray) -> np.ndarray:
    return gelu_forward(x)[0]


def gelu_backward(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """d(gelu)/dx given the cached tanh term from the forward pass."""
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (
        1.0 + 3.0 * _GELU_A * x * x
    )


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return gelu_backward(x, np.tanh(_GELU_C * x * (1.0 + _GELU_A * x * x)))


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def linear_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients for y = x @ w + b with arbitrary leading dims."""
    dw = np.tensordot(x, dy, axes=(range(x.ndim - 1), range(dy.ndim - 1)))
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    """Normalize over the last axis; returns (y, cache)."""
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layer_norm_backward(dy: np.ndarray, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).reshape(-1, dy.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(da: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Given grad wrt softmax output ``a``, return grad wrt its input."""
    return a * (da - (da * a).sum(axis=-1, keepdims=True))


def sinusoidal_positions(n_tokens: int, d_model: int) -> np.ndarray:
    """Fixed sinusoidal positional encodings [n_tokens, d_model]."""
    pos = np.arange(n_tokens)[:, None]
    i = np.arange(d_model // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / d_model)
    enc = np.zeros((n_tokens, d_model))
    enc[:, 0::2] = np.sin(angles)
    enc[:, 1::2] = np.cos(angles)
    return enc


def assert_finite(name: str, x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {name}")
