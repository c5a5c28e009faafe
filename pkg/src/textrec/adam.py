"""Adam optimizer over a named parameter dict."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OptimStateError


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in params.items():
            self.state.m[name] = np.zeros_like(p.data)
            self.state.v[name] = np.zeros_like(p.data)

    def step(self):
        """Apply one bias-corrected update; every parameter needs a grad."""
        st = self.state
        st.step_count += 1
        for name, p in self.params.items():
            if p.grad is None:
                raise OptimStateError(f"missing gradient for parameter '{name}'")
            if p.grad.shape != p.data.shape:
                raise OptimStateError(f"gradient shape mismatch for '{name}'")
            grad = np.ascontiguousarray(p.grad, dtype=p.data.dtype)
            kernels.adam_step(
                p.data.ravel(), grad.ravel(),
                st.m[name].ravel(), st.v[name].ravel(),
                st.step_count, st.lr, st.beta1, st.beta2, st.eps,
            )

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def adam_step(params, state: AdamState):
    """Functional form: one update of ``params`` (name -> Tensor) under ``state``."""
    state.step_count += 1
    for name, p in params.items():
        if p.grad is None:
            raise OptimStateError(f"missing gradient for parameter '{name}'")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        grad = np.ascontiguousarray(p.grad, dtype=p.data.dtype)
        kernels.adam_step(
            p.data.ravel(), grad.ravel(),
            state.m[name].ravel(), state.v[name].ravel(),
            state.step_count, state.lr, state.beta1, state.beta2, state.eps,
        )
