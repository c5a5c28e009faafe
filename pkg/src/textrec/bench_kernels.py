"""Benchmark the compiled kernel core against the numpy fallback.

Run with: python -m textrec.bench_kernels [--repeat N]
Shapes mirror the training hot path (batch 128, seq 50, d 64, catalog 500).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .kernels import _fallback

try:
    from .kernels import _core
except ImportError:
    _core = None


def _time(fn, args, repeat):
    fn(*args)  # warmup
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def benchmark_cases(dtype=np.float32):
    rng = np.random.default_rng(0)
    rows, width = 128 * 50, 64
    x2 = rng.standard_normal((rows, width)).astype(dtype)
    gy2 = rng.standard_normal((rows, width)).astype(dtype)
    gain = rng.standard_normal(width).astype(dtype)
    bias = rng.standard_normal(width).astype(dtype)
    flat = x2.ravel().copy()
    gflat = gy2.ravel().copy()
    logits = rng.standard_normal((2048, 500)).astype(dtype)
    targets = rng.integers(0, 500, size=2048).astype(np.int64)
    probs = _fallback.softmax_fwd(logits)
    p = rng.standard_normal(200_000).astype(dtype)
    g = rng.standard_normal(200_000).astype(dtype)
    m = np.zeros_like(p)
    v = np.zeros_like(p)

    _, mean, rstd = _fallback.layernorm_fwd(x2, gain, bias, 1e-5)
    return [
        ("gelu_fwd 409k", "gelu_fwd", (flat,)),
        ("gelu_bwd 409k", "gelu_bwd", (flat, gflat)),
        ("layernorm_fwd 6400x64", "layernorm_fwd", (x2, gain, bias, 1e-5)),
        ("layernorm_bwd 6400x64", "layernorm_bwd", (x2, gain, mean, rstd, gy2)),
        ("softmax_fwd 6400x64", "softmax_fwd", (x2,)),
        ("cross_entropy_fwd 2048x500", "cross_entropy_fwd", (logits, targets)),
        ("cross_entropy_bwd 2048x500", "cross_entropy_bwd", (probs, targets, 1.0)),
        ("adam_step 200k", "adam_step", (p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)

    if _core is None:
        print("compiled core not built (pip install -e . --no-build-isolation); "
              "timing the numpy fallback only")
    header = f"{'kernel':<28} {'numpy':>10} {'cython':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in benchmark_cases():
        t_np = _time(getattr(_fallback, name), call_args, args.repeat)
        if _core is not None:
            t_cy = _time(getattr(_core, name), call_args, args.repeat)
            print(f"{label:<28} {t_np * 1e3:>8.3f}ms {t_cy * 1e3:>8.3f}ms {t_np / t_cy:>7.2f}x")
        else:
            print(f"{label:<28} {t_np * 1e3:>8.3f}ms {'-':>10} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
