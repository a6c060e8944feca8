"""AdamW with decoupled weight decay.

The update per parameter p with gradient g at step t:

    m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g*g
    mhat = m / (1 - b1^t)         vhat = v / (1 - b2^t)
    p <- p - lr * (mhat / (sqrt(vhat) + eps) + weight_decay * p)

Decay multiplies the raw parameter, not the gradient, so it is unaffected
by the moment estimates.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Param

__all__ = ["AdamWState", "adamw_step"]


class AdamWState:
    """Moment buffers keyed by parameter name plus the hyperparameters.

    The learning rate lives here so a schedule can change it mid-run
    without touching the buffers.
    """

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def clone(self) -> "AdamWState":
        other = AdamWState(self.lr, self.beta1, self.beta2, self.eps, self.weight_decay)
        other.step_count = self.step_count
        other.m = {k: v.copy() for k, v in self.m.items()}
        other.v = {k: v.copy() for k, v in self.v.items()}
        return other


def adamw_step(params: list[Param], grads: dict[Param, np.ndarray],
               state: AdamWState) -> None:
    """One update over all params, in place.  A param with no gradient this
    step is treated as having gradient zero (its moments still shrink and
    weight decay still applies)."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.value)
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        if m is None:
            m = np.zeros_like(p.value)
            v = np.zeros_like(p.value)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[p.name] = m
        state.v[p.name] = v
        mhat = m / bc1
        vhat = v / bc2
        p.value = p.value - state.lr * (mhat / (np.sqrt(vhat) + state.eps)
                                        + state.weight_decay * p.value)
