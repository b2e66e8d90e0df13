"""Adam optimizer with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import NumericalError
from .params import ParameterSet


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus hyperparameters."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def for_params(params: ParameterSet, learning_rate: float, **kw) -> "AdamState":
        state = AdamState(learning_rate=learning_rate, **kw)
        for name, t in params.items():
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state


def adam_step(params: ParameterSet, state: AdamState) -> None:
    """Apply one Adam update from the gradients stored on ``params``.

    Parameters without an accumulated gradient are treated as having zero
    gradient (left unchanged through the zero-moment update).
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, tensor in params.items():
        g = tensor.grad
        if g is None:
            g = np.zeros_like(tensor.data)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != tensor.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter '{name}' {tensor.data.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter '{name}'")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        tensor.data = tensor.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
