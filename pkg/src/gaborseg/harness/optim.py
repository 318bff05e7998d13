"""Nesterov-accelerated Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LR_PRESETS = {
    "1e-4": 1e-4,
    "1e-3.5": 10 ** -3.5,
    "1e-3": 1e-3,
    "1e-2.5": 10 ** -2.5,
    "1e-2": 1e-2,
}


@dataclass
class NadamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def nadam_step(state: NadamState, params, grads):
    """Update ``params`` (list of arrays) in place and return them.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    p <- p - lr (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
    """
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ValueError("optimizer state was built for a different parameter list")
    state.t += 1
    b1, b2, t = state.beta1, state.beta2, state.t
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p -= state.lr * (b1 * m_hat + (1.0 - b1) * g / c1) / (np.sqrt(v_hat) + state.eps)
    return params


class Nadam:
    """Optimizer over a list of ``(name, Tensor)`` pairs."""

    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [t for _, t in named_params]
        self.state = NadamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self):
        grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in self.params]
        nadam_step(self.state, [t.data for t in self.params], grads)

    def zero_grad(self):
        for t in self.params:
            t.grad = None
