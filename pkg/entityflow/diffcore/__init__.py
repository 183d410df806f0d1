"""Reverse-mode differentiation over float64 arrays."""

from entityflow.diffcore.tensor import Tape, TapeNode, Tensor, active_tape, as_tensor
from entityflow.diffcore import ops
from entityflow.diffcore.ops import concat, masked_linear, matmul, softmax, stack
from entityflow.diffcore.optim import Adam, AdamState, adam_step
from entityflow.diffcore.gradcheck import check_gradients, check_parameter_gradients

__all__ = [
    "Tape",
    "TapeNode",
    "Tensor",
    "active_tape",
    "as_tensor",
    "ops",
    "concat",
    "masked_linear",
    "matmul",
    "softmax",
    "stack",
    "Adam",
    "AdamState",
    "adam_step",
    "check_gradients",
    "check_parameter_gradients",
]
