"""Adam with bias correction and the stepped learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamRegistry

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


class NumericAbort(RuntimeError):
    """Training hit a non-finite loss or gradient."""


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def init_adam(reg: ParamRegistry) -> AdamState:
    state = AdamState()
    for e in reg.entries():
        state.m[e.name] = np.zeros_like(e.tensor.data)
        state.v[e.name] = np.zeros_like(e.tensor.data)
    return state


def adam_step(reg: ParamRegistry, state: AdamState, lr: float):
    """One update over every registered parameter; missing grads are zero."""
    state.t += 1
    t = state.t
    correct1 = 1.0 - BETA1 ** t
    correct2 = 1.0 - BETA2 ** t
    for e in reg.entries():
        g = e.tensor.grad
        if g is None:
            g = np.zeros_like(e.tensor.data)
        elif not np.all(np.isfinite(g)):
            raise NumericAbort(f"non-finite gradient in {e.name}")
        m = state.m[e.name]
        v = state.v[e.name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        m_hat = m / correct1
        v_hat = v / correct2
        e.tensor.data = e.tensor.data - lr * m_hat / (np.sqrt(v_hat) + EPS)


def lr_at(lr0: float, decay_factor: float, decay_every: int, epoch: int) -> float:
    """Piecewise-constant schedule: lr0 * factor^(epoch // every)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * decay_factor ** (epoch // decay_every)
