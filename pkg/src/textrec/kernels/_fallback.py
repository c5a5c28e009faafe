"""Pure-numpy reference kernels.

Same call signatures as the compiled core in ``_core.pyx``; every function
accepts C-contiguous float32 or float64 arrays and preserves dtype. Row
kernels (layer norm, softmax, cross-entropy) expect 2-D inputs of shape
(rows, width); callers reshape.
"""

import numpy as np

BACKEND_NAME = "numpy"

_GELU_K0 = 0.7978845608028654  # sqrt(2/pi)
_GELU_K1 = 0.044715


def gelu_fwd(x):
    d = x.dtype.type
    inner = d(_GELU_K0) * (x + d(_GELU_K1) * x * x * x)
    return d(0.5) * x * (d(1.0) + np.tanh(inner))


def gelu_bwd(x, gy):
    d = x.dtype.type
    inner = d(_GELU_K0) * (x + d(_GELU_K1) * x * x * x)
    t = np.tanh(inner)
    dinner = d(_GELU_K0) * (d(1.0) + d(3.0 * _GELU_K1) * x * x)
    grad = d(0.5) * (d(1.0) + t) + d(0.5) * x * (d(1.0) - t * t) * dinner
    return gy * grad


def relu_fwd(x):
    return np.maximum(x, x.dtype.type(0.0))


def relu_bwd(x, gy):
    return np.where(x > 0, gy, gy.dtype.type(0.0))


def layernorm_fwd(x, gain, bias, eps):
    d = x.dtype.type
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    var = np.mean(centered * centered, axis=1)
    rstd = d(1.0) / np.sqrt(var + d(eps))
    xhat = centered * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layernorm_bwd(x, gain, mean, rstd, gy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    gxhat = gy * gain
    m1 = gxhat.mean(axis=1)
    m2 = (gxhat * xhat).mean(axis=1)
    gx = rstd[:, None] * (gxhat - m1[:, None] - xhat * m2[:, None])
    return gx, (gy * xhat).sum(axis=0), gy.sum(axis=0)


def softmax_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y, gy):
    dot = (y * gy).sum(axis=1, keepdims=True)
    return y * (gy - dot)


def cross_entropy_fwd(logits, targets):
    rows = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    denom = e.sum(axis=1, keepdims=True)
    probs = e / denom
    logp = shifted[np.arange(rows), targets] - np.log(denom[:, 0])
    loss = -logp.mean()
    return logits.dtype.type(loss), probs


def cross_entropy_bwd(probs, targets, gloss):
    rows = probs.shape[0]
    d = probs.dtype.type
    g = probs.copy()
    g[np.arange(rows), targets] -= d(1.0)
    g *= d(gloss) / d(rows)
    return g


def adam_step(param, grad, m, v, step, lr, beta1, beta2, eps):
    """In-place fused Adam update on flat views; step is 1-based."""
    d = param.dtype.type
    b1, b2 = d(beta1), d(beta2)
    m *= b1
    m += (d(1.0) - b1) * grad
    v *= b2
    v += (d(1.0) - b2) * grad * grad
    mhat = m / d(1.0 - beta1 ** step)
    vhat = v / d(1.0 - beta2 ** step)
    param -= d(lr) * mhat / (np.sqrt(vhat) + d(eps))
