"""Reverse-mode gradient engine for the small networks used in this package."""

from .gradcheck import GradCheckReport, gradient_check
from .optim import AdamState, adam_step
from .params import ParameterSet, dense_stack, glorot_uniform
from .recurrent import initial_state, lstm_arrays, recurrent_cell_step, unroll
from .tensor import (
    Tensor,
    add,
    backward,
    constant,
    custom_op,
    elu,
    input_gradient,
    l2_normalize_rows,
    linear,
    mean_all,
    mse,
    mul,
    reshape,
    scale,
    sigmoid,
    softmax_cross_entropy,
    sub,
    tanh_act,
)

__all__ = [
    "AdamState",
    "GradCheckReport",
    "ParameterSet",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "constant",
    "custom_op",
    "dense_stack",
    "elu",
    "glorot_uniform",
    "gradient_check",
    "initial_state",
    "input_gradient",
    "l2_normalize_rows",
    "linear",
    "lstm_arrays",
    "mean_all",
    "mse",
    "mul",
    "recurrent_cell_step",
    "reshape",
    "scale",
    "sigmoid",
    "softmax_cross_entropy",
    "sub",
    "tanh_act",
    "unroll",
]
