"""Dense tensors with reverse-mode gradients.

A ``Tensor`` wraps an owned, C-contiguous float32 or float64 ndarray.
Operations executed while a ``ComputeTape`` is active are recorded in
execution order; ``backward(loss)`` replays the records in exact reverse
order and accumulates d(loss)/d(tensor) into ``.grad`` for every reachable
tensor with ``requires_grad``. With no active tape the same functions are
plain numpy forward passes (the inference path).

Training arithmetic is float32; gradient-check harnesses build the same
graph at float64.
"""

from __future__ import annotations

import threading

import numpy as np

from . import kernels
from .errors import ShapeError, TapeStateError

_local = threading.local()


def _active_tape():
    return getattr(_local, "tape", None)


class Tensor:
    """Shape + row-major data + optional gradient accumulator."""

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        if dtype is None and not isinstance(data, np.ndarray):
            dtype = np.float32
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def is_finite(self):
        return bool(np.all(np.isfinite(self.data)))

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class _Record:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class ComputeTape:
    """Ordered record of executed operations, replayable once per reset."""

    def __init__(self):
        self._records = []
        self._consumed = False

    def __enter__(self):
        if getattr(_local, "tape", None) is not None:
            raise TapeStateError("a ComputeTape is already active on this thread")
        _local.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _local.tape = None
        return False

    def __len__(self):
        return len(self._records)

    def record(self, inputs, output, backward_fn):
        output.requires_grad = True
        output._tape = self
        self._records.append(_Record(inputs, output, backward_fn))

    def backward(self, loss):
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if loss._tape is not self:
            raise TapeStateError("loss was not recorded on this tape")
        if self._consumed:
            raise TapeStateError("tape already replayed; reset() before reusing")
        self._consumed = True
        if loss.grad is None:
            loss.grad = np.ones((), dtype=loss.data.dtype)
        for rec in reversed(self._records):
            gy = rec.output.grad
            if gy is None:
                continue
            grads = rec.backward_fn(gy)
            for t, g in zip(rec.inputs, grads):
                if g is None or not t.requires_grad:
                    continue
                t.grad = g if t.grad is None else t.grad + g

    def reset(self):
        self._records.clear()
        self._consumed = False


def backward(loss):
    """Populate grads of everything the scalar ``loss`` depends on."""
    if loss._tape is None:
        raise TapeStateError("loss was not produced under an active ComputeTape")
    loss._tape.backward(loss)


def _record_if_needed(inputs, out, backward_fn):
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(inputs, out, backward_fn)
    return out


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return np.ascontiguousarray(g)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; 2-D, or batched with identical leading dims."""
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError("matmul operands must be at least 2-D")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {ad.shape} x {bd.shape}")
    if ad.ndim != bd.ndim or ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError(f"matmul leading dims must match: {ad.shape} x {bd.shape}")
    out = Tensor(np.matmul(ad, bd))
    needs_a, needs_b = a.requires_grad, b.requires_grad

    def backward_fn(gy):
        ga = np.matmul(gy, bd.swapaxes(-1, -2)) if needs_a else None
        gb = np.matmul(ad.swapaxes(-1, -2), gy) if needs_b else None
        return ga, gb

    return _record_if_needed((a, b), out, backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def backward_fn(gy):
        return _unbroadcast(gy, a.data.shape), _unbroadcast(gy, b.data.shape)

    return _record_if_needed((a, b), out, backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def backward_fn(gy):
        return _unbroadcast(gy * bd, ad.shape), _unbroadcast(gy * ad, bd.shape)

    return _record_if_needed((a, b), out, backward_fn)


def scale(a: Tensor, factor: float) -> Tensor:
    f = a.data.dtype.type(factor)
    out = Tensor(a.data * f)

    def backward_fn(gy):
        return (gy * f,)

    return _record_if_needed((a,), out, backward_fn)


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(np.asarray(a.data.sum(), dtype=a.data.dtype))
    shape = a.data.shape

    def backward_fn(gy):
        return (np.full(shape, gy, dtype=gy.dtype),)

    return _record_if_needed((a,), out, backward_fn)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    flat = a.data.ravel()
    out = Tensor(kernels.gelu_fwd(flat).reshape(a.data.shape))

    def backward_fn(gy):
        return (kernels.gelu_bwd(flat, np.ascontiguousarray(gy).ravel()).reshape(a.data.shape),)

    return _record_if_needed((a,), out, backward_fn)


def relu(a: Tensor) -> Tensor:
    flat = a.data.ravel()
    out = Tensor(kernels.relu_fwd(flat).reshape(a.data.shape))

    def backward_fn(gy):
        return (kernels.relu_bwd(flat, np.ascontiguousarray(gy).ravel()).reshape(a.data.shape),)

    return _record_if_needed((a,), out, backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each trailing-dim vector to mean 0 / variance 1, then affine."""
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeError(f"layer_norm gain/bias must have shape ({d},)")
    x2 = x.data.reshape(-1, d)
    y2, mean, rstd = kernels.layernorm_fwd(x2, gain.data, bias.data, eps)
    out = Tensor(y2.reshape(x.data.shape))

    def backward_fn(gy):
        gy2 = np.ascontiguousarray(gy).reshape(-1, d)
        gx2, ggain, gbias = kernels.layernorm_bwd(x2, gain.data, mean, rstd, gy2)
        return gx2.reshape(x.data.shape), ggain, gbias

    return _record_if_needed((x, gain, bias), out, backward_fn)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax over the last dimension, max-subtracted for stability."""
    n = x.data.shape[-1]
    y2 = kernels.softmax_fwd(x.data.reshape(-1, n))
    out = Tensor(y2.reshape(x.data.shape))

    def backward_fn(gy):
        gy2 = np.ascontiguousarray(gy).reshape(-1, n)
        return (kernels.softmax_bwd(y2, gy2).reshape(x.data.shape),)

    return _record_if_needed((x,), out, backward_fn)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log softmax probability of each row's target index."""
    if logits.data.ndim != 2:
        raise ShapeError("cross_entropy expects 2-D logits (batch x classes)")
    t = np.ascontiguousarray(targets, dtype=np.int64)
    if t.ndim != 1 or t.shape[0] != logits.data.shape[0]:
        raise ShapeError("targets must be a vector with one index per logits row")
    nclasses = logits.data.shape[1]
    if t.size and (t.min() < 0 or t.max() >= nclasses):
        raise IndexError(f"target index out of range [0, {nclasses})")
    loss, probs = kernels.cross_entropy_fwd(logits.data, t)
    out = Tensor(np.asarray(loss, dtype=logits.data.dtype))

    def backward_fn(gy):
        return (kernels.cross_entropy_bwd(probs, t, float(gy)),)

    return _record_if_needed((logits,), out, backward_fn)


def gather_rows(x: Tensor, indices) -> Tensor:
    """Row lookup x[indices]; backward scatter-adds into the source rows."""
    if x.data.ndim != 2:
        raise ShapeError("gather_rows expects a 2-D source")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.shape[0]):
        raise IndexError(f"row index out of range [0, {x.data.shape[0]})")
    out = Tensor(x.data[idx])
    shape = x.data.shape

    def backward_fn(gy):
        gx = np.zeros(shape, dtype=gy.dtype)
        np.add.at(gx, idx.ravel(), gy.reshape(-1, shape[1]))
        return (gx,)

    return _record_if_needed((x,), out, backward_fn)


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise ShapeError("concat_rows expects 2-D operands of equal width")
    out = Tensor(np.concatenate([a.data, b.data], axis=0))
    na = a.data.shape[0]

    def backward_fn(gy):
        return np.ascontiguousarray(gy[:na]), np.ascontiguousarray(gy[na:])

    return _record_if_needed((a, b), out, backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    old = a.data.shape

    def backward_fn(gy):
        return (np.ascontiguousarray(gy).reshape(old),)

    return _record_if_needed((a,), out, backward_fn)


def transpose(a: Tensor, axes) -> Tensor:
    out = Tensor(np.ascontiguousarray(np.transpose(a.data, axes)))
    inverse = np.argsort(axes)

    def backward_fn(gy):
        return (np.ascontiguousarray(np.transpose(gy, inverse)),)

    return _record_if_needed((a,), out, backward_fn)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a mask drawn from ``rng``; identity at rate 0."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype)
    keep /= a.data.dtype.type(1.0 - rate)
    out = Tensor(a.data * keep)

    def backward_fn(gy):
        return (gy * keep,)

    return _record_if_needed((a,), out, backward_fn)
