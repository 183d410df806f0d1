"""Spatio-temporal conditions: C^t = ReLU(A^c H^t W1 + H^{t-1} W2) W3."""

import math
from typing import Optional

import numpy as np

from entityflow.core.base_module import BaseModule
from entityflow.core.exceptions import DimensionError
from entityflow.diffcore import Tensor, as_tensor
from entityflow.models.temporal import HiddenStates


class SpatioTemporalCondition(BaseModule):
    """Graph convolution of the hidden states plus a history term, then a projection."""

    def __init__(
        self, hidden_size: int = 32, condition_size: int = 32, rng: Optional[np.random.Generator] = None
    ):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        bound = 1.0 / math.sqrt(hidden_size)
        self.hidden_size = hidden_size
        self.condition_size = condition_size
        self.w_graph = self.register_parameter(
            "w_graph", rng.uniform(-bound, bound, (hidden_size, hidden_size))
        )
        self.w_history = self.register_parameter(
            "w_history", rng.uniform(-bound, bound, (hidden_size, hidden_size))
        )
        self.w_project = self.register_parameter(
            "w_project", rng.uniform(-bound, bound, (hidden_size, condition_size))
        )

    def forward(self, hidden: HiddenStates, adjacency: Tensor) -> Tensor:
        """
        Args:
            hidden: B x T x K x h states and their shift
            adjacency: B x K x K per-window graph

        Returns:
            B x T x K x d conditions
        """
        adjacency = as_tensor(adjacency)
        b, t_len, k, _ = hidden.current.shape
        if adjacency.shape != (b, k, k):
            raise DimensionError(
                f"adjacency {adjacency.shape} does not match {b} windows of {k} entities"
            )
        mixed = adjacency.reshape(b, 1, k, k) @ hidden.current
        pre = mixed @ self.w_graph + hidden.previous @ self.w_history
        return pre.relu() @ self.w_project


def build_condition(hidden: HiddenStates, adjacency: Tensor, weights: SpatioTemporalCondition) -> Tensor:
    return weights(hidden, adjacency)


def per_entity_condition(condition: Tensor) -> Tensor:
    """Concatenate C^t along time: B x T x K x d -> (B*K) x (T*d), rows ordered window-major."""
    b, t_len, k, d = condition.shape
    return condition.transpose(0, 2, 1, 3).reshape(b * k, t_len * d)
