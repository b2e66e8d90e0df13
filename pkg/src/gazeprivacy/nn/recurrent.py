"""Single-layer LSTM-style recurrent cell.

Input, forget and output gates plus a tanh candidate; backpropagation
through time falls out of unrolling the cell on the shared tape.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .params import ParameterSet, glorot_uniform
from .tensor import Tensor, add, constant, linear, mul, sigmoid, tanh_act

GATES = ("i", "f", "o", "g")


def lstm_arrays(rng: np.random.Generator, input_dim: int, hidden_dim: int, prefix: str = "lstm") -> Dict[str, np.ndarray]:
    """Initial weight arrays for one cell: per gate W (hidden, in), U (hidden, hidden), b."""
    arrays: Dict[str, np.ndarray] = {}
    for gate in GATES:
        arrays[f"{prefix}_w{gate}"] = glorot_uniform(rng, hidden_dim, input_dim)
        arrays[f"{prefix}_u{gate}"] = glorot_uniform(rng, hidden_dim, hidden_dim)
        arrays[f"{prefix}_b{gate}"] = np.zeros(hidden_dim)
    return arrays


def initial_state(batch: int, hidden_dim: int) -> Tuple[Tensor, Tensor]:
    zeros = np.zeros((batch, hidden_dim))
    return constant(zeros.copy(), "h0"), constant(zeros.copy(), "c0")


def recurrent_cell_step(
    params: ParameterSet,
    x: Tensor,
    state: Tuple[Tensor, Tensor],
    prefix: str = "lstm",
) -> Tuple[Tuple[Tensor, Tensor], Tensor]:
    """One gated update; returns ((h', c'), output) with output = h'."""
    h, c = state
    if x.data.ndim != 2 or h.data.ndim != 2 or x.data.shape[0] != h.data.shape[0]:
        raise ValueError(f"state/input batch mismatch: input {x.data.shape}, hidden {h.data.shape}")

    def gate(name: str) -> Tensor:
        return add(
            linear(x, params[f"{prefix}_w{name}"], params[f"{prefix}_b{name}"]),
            linear(h, params[f"{prefix}_u{name}"]),
        )

    i = sigmoid(gate("i"))
    f = sigmoid(gate("f"))
    o = sigmoid(gate("o"))
    g = tanh_act(gate("g"))
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh_act(c_next))
    return (h_next, c_next), h_next


def unroll(
    params: ParameterSet,
    inputs: List[Tensor],
    state: Optional[Tuple[Tensor, Tensor]] = None,
    prefix: str = "lstm",
) -> Tuple[Tuple[Tensor, Tensor], List[Tensor]]:
    """Run the cell over a sequence of (batch, input_dim) tensors."""
    if not inputs:
        raise ValueError("cannot unroll over an empty sequence")
    if state is None:
        hidden_dim = params[f"{prefix}_uh" if f"{prefix}_uh" in params else f"{prefix}_ui"].data.shape[0]
        state = initial_state(inputs[0].data.shape[0], hidden_dim)
    outputs: List[Tensor] = []
    for x in inputs:
        state, out = recurrent_cell_step(params, x, state, prefix=prefix)
        outputs.append(out)
    return state, outputs
