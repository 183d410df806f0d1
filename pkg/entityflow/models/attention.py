"""Dynamic inter-entity graph from scaled dot-product self-attention.

Entities are graph nodes; the window of entity i is its feature vector. The
row-softmaxed attention matrix is used directly as the adjacency A^c.
"""

import math
from typing import Optional

import numpy as np

from entityflow.core.base_module import BaseModule
from entityflow.core.exceptions import DimensionError, UsageError
from entityflow.diffcore import Tensor, as_tensor


class GraphAttention(BaseModule):
    """
    Single-head, single-layer attention with T x T query and key weights.

    Args:
        window: Window length T
        dropout: Inverted-dropout rate on the attention weights in training mode
        rng: Generator for weight initialization
    """

    def __init__(self, window: int, dropout: float = 0.2, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if not 0 <= dropout < 1:
            raise UsageError(f"dropout rate must be in [0, 1), got {dropout}")
        rng = rng or np.random.default_rng(0)
        bound = 1.0 / math.sqrt(window)
        self.window = window
        self.dropout = dropout
        self.w_query = self.register_parameter("w_query", rng.uniform(-bound, bound, (window, window)))
        self.w_key = self.register_parameter("w_key", rng.uniform(-bound, bound, (window, window)))

    def forward(
        self,
        x: Tensor,
        training: Optional[bool] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """
        Compute A^c for every window.

        Args:
            x: B x K x T windows
            training: Overrides the module mode when given
            rng: Dropout mask generator, required in training mode with dropout

        Returns:
            B x K x K adjacency, rows summing to 1 when dropout is off
        """
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.window:
            raise DimensionError(f"attention expects B x K x {self.window} windows, got {x.shape}")
        training = self.training if training is None else training

        query = x @ self.w_query
        key = x @ self.w_key
        scores = (query @ key.T) / math.sqrt(self.window)
        adjacency = scores.softmax()

        if training and self.dropout > 0:
            if rng is None:
                raise UsageError("training-mode attention needs an rng for dropout")
            keep = rng.random(adjacency.shape) >= self.dropout
            adjacency = adjacency * (keep / (1.0 - self.dropout))
        return adjacency


def attention_adjacency(
    values: np.ndarray,
    params: GraphAttention,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Adjacency matrices of ``values`` (B x K x T) as a plain array."""
    return params(Tensor(values), training=training, rng=rng).numpy()
