"""Bias-corrected Adam."""

from __future__ import annotations

import numpy as np

from .tensor import Parameter


class AdamState:
    """First/second moment buffers plus shared step counter for one array."""

    def __init__(self, shape, lr: float = 5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_update(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One Adam step; returns the updated parameter array.

    Moments decay as m <- b1*m + (1-b1)*g, v <- b2*v + (1-b2)*g^2 with
    bias correction 1 - b^t.  A zero gradient leaves fresh parameters
    unchanged because the corrected moments both stay zero.
    """
    state.t += 1
    g = np.asarray(grads, dtype=np.float64)
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Optimizer over Parameter leaves; per-parameter learning rates allowed.

    ``params`` is a list of Parameter or (Parameter, lr) pairs.  Parameters
    with no accumulated gradient are skipped (their step counter still
    advances so moment bias correction stays aligned across the group).
    """

    def __init__(self, params, lr: float = 5e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self._entries: list[tuple[Parameter, AdamState]] = []
        for item in params:
            if isinstance(item, tuple):
                p, plr = item
            else:
                p, plr = item, lr
            self._entries.append((p, AdamState(p.value.shape, plr, beta1, beta2, eps)))

    def step(self) -> None:
        for p, st in self._entries:
            if p.grad is None:
                st.t += 1
                continue
            p.value = adam_update(st, p.value, p.grad)

    def zero_grad(self) -> None:
        for p, _ in self._entries:
            p.grad = None

    def parameters(self) -> list[Parameter]:
        return [p for p, _ in self._entries]
