"""Adam parameter updates with bias correction."""

from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from entityflow.core.exceptions import DimensionError, UsageError
from entityflow.diffcore.tensor import Tensor
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)


class AdamState(BaseModel):
    """Moment estimates and hyperparameters of one Adam optimizer."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    learning_rate: float = Field(default=0.002, gt=0)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = Field(default_factory=dict)
    v: Dict[str, np.ndarray] = Field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    Apply one Adam update.

    Args:
        params: Parameter arrays keyed by name
        grads: Gradients keyed like ``params``; missing keys count as zero
        state: Optimizer state before the step

    Returns:
        Tuple of (updated parameters, advanced state); inputs are not modified

    Raises:
        DimensionError: If a gradient or moment shape differs from its parameter
    """
    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    step_size = state.learning_rate / bc1

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        if g.shape != value.shape:
            raise DimensionError(
                f"gradient for '{name}' has shape {g.shape}, parameter has {value.shape}"
            )
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        if m.shape != value.shape or v.shape != value.shape:
            raise DimensionError(f"moment estimates for '{name}' do not match shape {value.shape}")

        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.epsilon
        new_params[name] = value - step_size * m / denom
        new_m[name] = m
        new_v[name] = v

    return new_params, state.model_copy(update={"step": t, "m": new_m, "v": new_v})


class Adam:
    """
    Adam optimizer over named parameter tensors.

    Reads ``grad`` from each tensor, applies :func:`adam_step` and writes the
    result back with ``Tensor.assign``.

    Example:
        >>> opt = Adam(model.named_parameters(), learning_rate=0.002)
        >>> opt.zero_grad()
        >>> ...backward...
        >>> opt.step()
    """

    def __init__(
        self,
        params: Dict[str, Tensor],
        learning_rate: float = 0.002,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise UsageError(f"learning rate must be positive, got {learning_rate}")
        self.params = dict(params)
        self.state = AdamState(
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon
        )

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def gradients(self) -> Dict[str, Optional[np.ndarray]]:
        return {name: tensor.grad for name, tensor in self.params.items() if tensor.grad is not None}

    def step(self) -> None:
        values = {name: tensor.data for name, tensor in self.params.items()}
        updated, self.state = adam_step(values, self.gradients(), self.state)
        for name, tensor in self.params.items():
            tensor.assign(updated[name])
        logger.debug(f"Adam step {self.state.step}")
