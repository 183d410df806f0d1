"""Per-entity temporal encoding with a single-layer LSTM."""

import math
from typing import NamedTuple, Optional

import numpy as np

from entityflow.core.base_module import BaseModule
from entityflow.core.exceptions import DimensionError
from entityflow.diffcore import Tensor, as_tensor, concat, stack


class HiddenStates(NamedTuple):
    """Hidden sequence H^t and its one-step shift H^{t-1}, both B x T x K x h."""

    current: Tensor
    previous: Tensor


class LSTMEncoder(BaseModule):
    """
    LSTM over the scalar series of each entity, weights shared across entities.

    Gate layout in the 4h columns: input, forget, cell candidate, output.
    Weights are uniform in +-1/sqrt(h); the forget-gate bias starts at 1.
    """

    def __init__(self, hidden_size: int = 32, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        h = hidden_size
        bound = 1.0 / math.sqrt(h)
        bias = np.zeros(4 * h)
        bias[h:2 * h] = 1.0
        self.hidden_size = h
        self.w_input = self.register_parameter("w_input", rng.uniform(-bound, bound, (1, 4 * h)))
        self.w_hidden = self.register_parameter("w_hidden", rng.uniform(-bound, bound, (h, 4 * h)))
        self.bias = self.register_parameter("bias", bias)

    def forward(self, x: Tensor) -> HiddenStates:
        """
        Encode B x K x T windows.

        Every window starts from a zero state; H^{t-1} at t = 0 is zero.
        """
        x = as_tensor(x)
        if x.ndim != 3:
            raise DimensionError(f"encoder expects B x K x T windows, got {x.shape}")
        b, k, t_len = x.shape
        h = self.hidden_size
        n = b * k
        sequence = x.reshape(n, t_len)

        hidden = Tensor(np.zeros((n, h)))
        cell = Tensor(np.zeros((n, h)))
        outputs = []
        for t in range(t_len):
            gates = sequence[:, t:t + 1] @ self.w_input + hidden @ self.w_hidden + self.bias
            input_gate = gates[:, :h].sigmoid()
            forget_gate = gates[:, h:2 * h].sigmoid()
            candidate = gates[:, 2 * h:3 * h].tanh()
            output_gate = gates[:, 3 * h:].sigmoid()
            cell = forget_gate * cell + input_gate * candidate
            hidden = output_gate * cell.tanh()
            outputs.append(hidden)

        current = stack(outputs, axis=1).reshape(b, k, t_len, h).transpose(0, 2, 1, 3)
        previous = concat([Tensor(np.zeros((b, 1, k, h))), current[:, :-1]], axis=1)
        return HiddenStates(current=current, previous=previous)


def encode(values: Tensor, params: LSTMEncoder) -> HiddenStates:
    """Run ``params`` over B x K x T windows."""
    return params(values)
