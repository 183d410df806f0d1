"""Anomaly injectors for synthetic series.

Each injector writes one contiguous anomalous segment into a single entity.
Amplitudes are multiples of the entity's standard deviation over the whole
pre-injection series (signal plus noise), not of the noise level alone.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Type

import numpy as np

from entityflow.core.exceptions import ConfigurationError


class AnomalyInjector(ABC):
    """Abstract base class for anomaly kinds."""

    kind = "unknown"
    min_length = 1
    max_length = 1

    def sample_length(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.min_length, self.max_length + 1))

    @abstractmethod
    def apply(
        self,
        values: np.ndarray,
        entity: int,
        start: int,
        length: int,
        scale: float,
        rng: np.random.Generator,
    ) -> None:
        """
        Modify ``values[entity, start:start + length]`` in place.

        Args:
            values: K x L working array
            entity: Row to modify
            start: First anomalous step
            length: Segment length
            scale: Pre-injection standard deviation of the entity
            rng: Generator owned by the caller
        """
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(kind={self.kind}, length={self.min_length}-{self.max_length})"


class SpikeInjector(AnomalyInjector):
    """Short run of +6 sigma impulses."""

    kind = "spike"
    min_length = 1
    max_length = 3

    def apply(self, values, entity, start, length, scale, rng):
        values[entity, start:start + length] += 6.0 * scale


class LevelShiftInjector(AnomalyInjector):
    """+3 sigma offset held for 20-40 steps."""

    kind = "level_shift"
    min_length = 20
    max_length = 40

    def apply(self, values, entity, start, length, scale, rng):
        values[entity, start:start + length] += 3.0 * scale


class DecorrelateInjector(AnomalyInjector):
    """Entity replaced by independent Gaussian noise of matching mean and scale."""

    kind = "decorrelate"
    min_length = 20
    max_length = 40

    def apply(self, values, entity, start, length, scale, rng):
        center = values[entity].mean()
        values[entity, start:start + length] = rng.normal(center, scale, size=length)


INJECTOR_REGISTRY: Dict[str, Type[AnomalyInjector]] = {
    "spike": SpikeInjector,
    "level_shift": LevelShiftInjector,
    "decorrelate": DecorrelateInjector,
}


def get_injector(kind: str) -> AnomalyInjector:
    """
    Get an injector instance by kind.

    Raises:
        ConfigurationError: If the kind is not registered
    """
    injector_class = INJECTOR_REGISTRY.get(kind.lower().replace("-", "_"))
    if injector_class is None:
        available = ", ".join(INJECTOR_REGISTRY.keys())
        raise ConfigurationError(f"Anomaly kind '{kind}' not found. Available kinds: {available}")
    return injector_class()


def list_injectors() -> List[str]:
    """List all registered anomaly kinds."""
    return list(INJECTOR_REGISTRY.keys())
