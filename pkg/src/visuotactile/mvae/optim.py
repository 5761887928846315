"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    skipped: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> bool:
    """Update ``params`` in place.

    A non-finite gradient aborts the whole step (parameters and moments are
    left untouched) and returns False.
    """
    for k in params:
        if grads[k].shape != params[k].shape:
            raise ValueError(f"gradient shape mismatch for {k}")
    if not all(np.all(np.isfinite(grads[k])) for k in params):
        state.skipped += 1
        return False
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for k in params:
        g = grads[k]
        m = state.m.get(k)
        v = state.v.get(k)
        m = (1.0 - beta1) * g if m is None else beta1 * m + (1.0 - beta1) * g
        v = (1.0 - beta2) * g * g if v is None else beta2 * v + (1.0 - beta2) * g * g
        state.m[k], state.v[k] = m, v
        params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return True
