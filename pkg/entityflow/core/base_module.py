"""Base class that all trainable model components inherit from."""

from abc import ABC, abstractmethod
from typing import Dict, Iterator, Tuple

import numpy as np

from entityflow.core.exceptions import ConfigurationError
from entityflow.diffcore import Tensor


class BaseModule(ABC):
    """
    Abstract base class for trainable components.

    Parameters and sub-modules are registered by name so every parameter
    has a hierarchical path such as ``flow/block0/w_in``; checkpoints and
    the optimizer address parameters by that path.
    """

    def __init__(self):
        self.training = True
        self._parameters: Dict[str, Tensor] = {}
        self._modules: Dict[str, "BaseModule"] = {}

    @abstractmethod
    def forward(self, *args, **kwargs):
        """Run the component on tensors."""
        pass

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def register_parameter(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor(value, requires_grad=True, name=name)
        self._parameters[name] = tensor
        return tensor

    def add_module(self, name: str, module: "BaseModule") -> "BaseModule":
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        """All trainable tensors keyed by hierarchical path, in registration order."""
        return dict(self._iter_parameters(prefix))

    def _iter_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._parameters.items():
            yield f"{prefix}{name}", tensor
        for name, module in self._modules.items():
            yield from module._iter_parameters(f"{prefix}{name}/")

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.numpy() for name, tensor in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Copy arrays into the parameters.

        Raises:
            ConfigurationError: If a parameter path is missing from ``state``
        """
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        if missing:
            raise ConfigurationError(f"state is missing parameters: {', '.join(missing)}")
        for name, tensor in params.items():
            tensor.assign(state[name])

    def zero_grad(self) -> None:
        for tensor in self.named_parameters().values():
            tensor.zero_grad()

    def train(self, mode: bool = True) -> "BaseModule":
        self.training = mode
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> "BaseModule":
        return self.train(False)

    def __repr__(self) -> str:
        shapes = {name: tensor.shape for name, tensor in self._parameters.items()}
        return (
            f"{self.__class__.__name__}("
            f"parameters={shapes}, "
            f"modules={list(self._modules)}"
            f")"
        )
