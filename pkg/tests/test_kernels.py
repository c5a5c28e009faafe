"""Backend agreement: compiled core vs numpy fallback on random inputs."""

import numpy as np
import pytest

from textrec import kernels
from textrec.kernels import _fallback

try:
    from textrec.kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def _tols(dtype):
    return {"rtol": 2e-5, "atol": 1e-6} if dtype == np.float32 else {"rtol": 1e-12, "atol": 1e-13}


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_elementwise_kernels_agree(dtype):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(257).astype(dtype)
    gy = rng.standard_normal(257).astype(dtype)
    np.testing.assert_allclose(_core.gelu_fwd(x), _fallback.gelu_fwd(x), **_tols(dtype))
    np.testing.assert_allclose(_core.gelu_bwd(x, gy), _fallback.gelu_bwd(x, gy), **_tols(dtype))
    np.testing.assert_array_equal(_core.relu_fwd(x), _fallback.relu_fwd(x))
    np.testing.assert_array_equal(_core.relu_bwd(x, gy), _fallback.relu_bwd(x, gy))


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_row_kernels_agree(dtype):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((33, 17)).astype(dtype)
    gy = rng.standard_normal((33, 17)).astype(dtype)
    gain = rng.standard_normal(17).astype(dtype)
    bias = rng.standard_normal(17).astype(dtype)

    yc, mc, rc = _core.layernorm_fwd(x, gain, bias, 1e-5)
    yf, mf, rf = _fallback.layernorm_fwd(x, gain, bias, 1e-5)
    np.testing.assert_allclose(yc, yf, **_tols(dtype))
    np.testing.assert_allclose(mc, mf, **_tols(dtype))
    np.testing.assert_allclose(rc, rf, **_tols(dtype))
    for c, f in zip(_core.layernorm_bwd(x, gain, mc, rc, gy),
                    _fallback.layernorm_bwd(x, gain, mf, rf, gy)):
        np.testing.assert_allclose(c, f, **_tols(dtype))

    sc = _core.softmax_fwd(x)
    sf = _fallback.softmax_fwd(x)
    np.testing.assert_allclose(sc, sf, **_tols(dtype))
    np.testing.assert_allclose(_core.softmax_bwd(sc, gy), _fallback.softmax_bwd(sf, gy), **_tols(dtype))


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_cross_entropy_and_adam_agree(dtype):
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((19, 11)).astype(dtype)
    targets = rng.integers(0, 11, size=19).astype(np.int64)

    lc, pc = _core.cross_entropy_fwd(logits, targets)
    lf, pf = _fallback.cross_entropy_fwd(logits, targets)
    assert abs(float(lc) - float(lf)) < (1e-5 if dtype == np.float32 else 1e-12)
    np.testing.assert_allclose(pc, pf, **_tols(dtype))
    np.testing.assert_allclose(
        _core.cross_entropy_bwd(pc, targets, 1.0),
        _fallback.cross_entropy_bwd(pf, targets, 1.0), **_tols(dtype))

    p1 = rng.standard_normal(301).astype(dtype)
    p2 = p1.copy()
    g = rng.standard_normal(301).astype(dtype)
    m1, v1 = np.zeros_like(p1), np.zeros_like(p1)
    m2, v2 = np.zeros_like(p2), np.zeros_like(p2)
    for t in range(1, 6):
        _core.adam_step(p1, g, m1, v1, t, 1e-3, 0.9, 0.999, 1e-8)
        _fallback.adam_step(p2, g, m2, v2, t, 1e-3, 0.9, 0.999, 1e-8)
    np.testing.assert_allclose(p1, p2, **_tols(dtype))


def test_selected_backend_exposes_full_api():
    for fn in ("gelu_fwd", "gelu_bwd", "relu_fwd", "relu_bwd", "layernorm_fwd",
               "layernorm_bwd", "softmax_fwd", "softmax_bwd",
               "cross_entropy_fwd", "cross_entropy_bwd", "adam_step"):
        assert callable(getattr(kernels, fn))
    assert kernels.BACKEND in ("cython", "numpy")
