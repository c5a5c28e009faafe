# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: fused elementwise/row loops for the training hot path.

Mirrors the signatures in ``_fallback.py``. Compiled with -O3 -ffast-math so
the exp/tanh loops vectorize; float32 results can differ from numpy in the
last bits, and backend-equivalence tests use tolerances accordingly.
"""

import numpy as np

cimport cython
from libc.math cimport exp, expf, log, logf, sqrt, sqrtf, tanh, tanhf

BACKEND_NAME = "cython"

ctypedef fused real:
    float
    double

cdef double GELU_K0 = 0.7978845608028654
cdef double GELU_K1 = 0.044715


cdef inline real _exp(real x) noexcept nogil:
    if real is float:
        return expf(x)
    else:
        return exp(x)


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


cdef inline real _log(real x) noexcept nogil:
    if real is float:
        return logf(x)
    else:
        return log(x)


cdef inline real _sqrt(real x) noexcept nogil:
    if real is float:
        return sqrtf(x)
    else:
        return sqrt(x)


def gelu_fwd(real[::1] x not None):
    cdef Py_ssize_t i, n = x.shape[0]
    out_np = np.empty(n, dtype=np.asarray(x).dtype)
    cdef real[::1] out = out_np
    cdef real xi, k0 = <real> GELU_K0, k1 = <real> GELU_K1
    for i in range(n):
        xi = x[i]
        out[i] = <real> 0.5 * xi * (<real> 1.0 + _tanh(k0 * (xi + k1 * xi * xi * xi)))
    return out_np


def gelu_bwd(real[::1] x not None, real[::1] gy not None):
    cdef Py_ssize_t i, n = x.shape[0]
    out_np = np.empty(n, dtype=np.asarray(x).dtype)
    cdef real[::1] out = out_np
    cdef real xi, t, dinner, k0 = <real> GELU_K0, k1 = <real> GELU_K1
    for i in range(n):
        xi = x[i]
        t = _tanh(k0 * (xi + k1 * xi * xi * xi))
        dinner = k0 * (<real> 1.0 + <real> 3.0 * k1 * xi * xi)
        out[i] = gy[i] * (<real> 0.5 * (<real> 1.0 + t)
                          + <real> 0.5 * xi * (<real> 1.0 - t * t) * dinner)
    return out_np


def relu_fwd(real[::1] x not None):
    cdef Py_ssize_t i, n = x.shape[0]
    out_np = np.empty(n, dtype=np.asarray(x).dtype)
    cdef real[::1] out = out_np
    for i in range(n):
        out[i] = x[i] if x[i] > 0 else <real> 0.0
    return out_np


def relu_bwd(real[::1] x not None, real[::1] gy not None):
    cdef Py_ssize_t i, n = x.shape[0]
    out_np = np.empty(n, dtype=np.asarray(x).dtype)
    cdef real[::1] out = out_np
    for i in range(n):
        out[i] = gy[i] if x[i] > 0 else <real> 0.0
    return out_np


def layernorm_fwd(real[:, ::1] x not None, real[::1] gain not None,
                  real[::1] bias not None, double eps):
    cdef Py_ssize_t r, c, rows = x.shape[0], width = x.shape[1]
    dtype = np.asarray(x).dtype
    out_np = np.empty((rows, width), dtype=dtype)
    mean_np = np.empty(rows, dtype=dtype)
    rstd_np = np.empty(rows, dtype=dtype)
    cdef real[:, ::1] out = out_np
    cdef real[::1] mean = mean_np
    cdef real[::1] rstd = rstd_np
    cdef real acc, mu, rs, xhat
    for r in range(rows):
        acc = <real> 0.0
        for c in range(width):
            acc += x[r, c]
        mu = acc / <real> width
        acc = <real> 0.0
        for c in range(width):
            acc += (x[r, c] - mu) * (x[r, c] - mu)
        rs = <real> 1.0 / _sqrt(acc / <real> width + <real> eps)
        mean[r] = mu
        rstd[r] = rs
        for c in range(width):
            xhat = (x[r, c] - mu) * rs
            out[r, c] = xhat * gain[c] + bias[c]
    return out_np, mean_np, rstd_np


def layernorm_bwd(real[:, ::1] x not None, real[::1] gain not None,
                  real[::1] mean not None, real[::1] rstd not None,
                  real[:, ::1] gy not None):
    cdef Py_ssize_t r, c, rows = x.shape[0], width = x.shape[1]
    dtype = np.asarray(x).dtype
    gx_np = np.empty((rows, width), dtype=dtype)
    ggain_np = np.zeros(width, dtype=dtype)
    gbias_np = np.zeros(width, dtype=dtype)
    cdef real[:, ::1] gx = gx_np
    cdef real[::1] ggain = ggain_np
    cdef real[::1] gbias = gbias_np
    cdef real mu, rs, m1, m2, xhat, gxhat
    for r in range(rows):
        mu = mean[r]
        rs = rstd[r]
        m1 = <real> 0.0
        m2 = <real> 0.0
        for c in range(width):
            xhat = (x[r, c] - mu) * rs
            gxhat = gy[r, c] * gain[c]
            m1 += gxhat
            m2 += gxhat * xhat
            ggain[c] += gy[r, c] * xhat
            gbias[c] += gy[r, c]
        m1 /= <real> width
        m2 /= <real> width
        for c in range(width):
            xhat = (x[r, c] - mu) * rs
            gxhat = gy[r, c] * gain[c]
            gx[r, c] = rs * (gxhat - m1 - xhat * m2)
    return gx_np, ggain_np, gbias_np


def softmax_fwd(real[:, ::1] x not None):
    cdef Py_ssize_t r, c, rows = x.shape[0], width = x.shape[1]
    out_np = np.empty((rows, width), dtype=np.asarray(x).dtype)
    cdef real[:, ::1] out = out_np
    cdef real mx, acc
    for r in range(rows):
        mx = x[r, 0]
        for c in range(1, width):
            if x[r, c] > mx:
                mx = x[r, c]
        acc = <real> 0.0
        for c in range(width):
            out[r, c] = _exp(x[r, c] - mx)
            acc += out[r, c]
        for c in range(width):
            out[r, c] = out[r, c] / acc
    return out_np


def softmax_bwd(real[:, ::1] y not None, real[:, ::1] gy not None):
    cdef Py_ssize_t r, c, rows = y.shape[0], width = y.shape[1]
    gx_np = np.empty((rows, width), dtype=np.asarray(y).dtype)
    cdef real[:, ::1] gx = gx_np
    cdef real dot
    for r in range(rows):
        dot = <real> 0.0
        for c in range(width):
            dot += y[r, c] * gy[r, c]
        for c in range(width):
            gx[r, c] = y[r, c] * (gy[r, c] - dot)
    return gx_np


def cross_entropy_fwd(real[:, ::1] logits not None, long[::1] targets not None):
    cdef Py_ssize_t r, c, rows = logits.shape[0], width = logits.shape[1]
    dtype = np.asarray(logits).dtype
    probs_np = np.empty((rows, width), dtype=dtype)
    cdef real[:, ::1] probs = probs_np
    cdef real mx, acc
    cdef double loss = 0.0
    for r in range(rows):
        mx = logits[r, 0]
        for c in range(1, width):
            if logits[r, c] > mx:
                mx = logits[r, c]
        acc = <real> 0.0
        for c in range(width):
            probs[r, c] = _exp(logits[r, c] - mx)
            acc += probs[r, c]
        loss -= (logits[r, targets[r]] - mx) - _log(acc)
        for c in range(width):
            probs[r, c] = probs[r, c] / acc
    return dtype.type(loss / rows), probs_np


def cross_entropy_bwd(real[:, ::1] probs not None, long[::1] targets not None,
                      double gloss):
    cdef Py_ssize_t r, c, rows = probs.shape[0], width = probs.shape[1]
    g_np = np.empty((rows, width), dtype=np.asarray(probs).dtype)
    cdef real[:, ::1] g = g_np
    cdef real scale = <real> (gloss / rows)
    for r in range(rows):
        for c in range(width):
            g[r, c] = probs[r, c] * scale
        g[r, targets[r]] -= scale
    return g_np


def adam_step(real[::1] param not None, real[::1] grad not None,
              real[::1] m not None, real[::1] v not None,
              long step, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t i, n = param.shape[0]
    cdef real b1 = <real> beta1, b2 = <real> beta2
    cdef real c1 = <real> (1.0 - beta1 ** step)
    cdef real c2 = <real> (1.0 - beta2 ** step)
    cdef real rlr = <real> lr, reps = <real> eps
    cdef real one = <real> 1.0
    cdef real mi, vi
    for i in range(n):
        mi = b1 * m[i] + (one - b1) * grad[i]
        vi = b2 * v[i] + (one - b2) * grad[i] * grad[i]
        m[i] = mi
        v[i] = vi
        param[i] -= rlr * (mi / c1) / (_sqrt(vi / c2) + reps)
    return None
