"""Per-entity z-score normalization."""

from typing import Tuple

import numpy as np

from entityflow.core.data_model import NormStats, SeriesTable
from entityflow.core.exceptions import ConfigurationError
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)

STD_EPSILON = 1e-8


def fit_normalize(table: SeriesTable, fit_range: Tuple[int, int]) -> Tuple[SeriesTable, NormStats]:
    """
    Fit per-entity mean and population std on ``fit_range`` and apply them to the whole series.

    Args:
        table: Raw series
        fit_range: Half-open index range [start, stop) used for the statistics

    Returns:
        Tuple of (normalized table, fitted statistics)

    Raises:
        ConfigurationError: If ``fit_range`` is empty or outside [0, L)
    """
    start, stop = int(fit_range[0]), int(fit_range[1])
    if not 0 <= start < stop <= table.length:
        raise ConfigurationError(
            f"fit range [{start}, {stop}) must be a nonempty subrange of [0, {table.length})"
        )
    fitted = table.values[:, start:stop]
    stats = NormStats(
        mean=fitted.mean(axis=1),
        std=fitted.std(axis=1),
        fit_start=start,
        fit_stop=stop,
        epsilon=STD_EPSILON,
    )
    for k in np.flatnonzero(stats.std < STD_EPSILON):
        logger.warning(f"Entity '{table.entities[k]}' is constant on the fit range; normalized to zeros")
    return apply_normalize(table, stats), stats


def apply_normalize(table: SeriesTable, stats: NormStats) -> SeriesTable:
    """
    Normalize ``table`` with previously fitted statistics.

    Raises:
        ConfigurationError: If the entity count differs from the statistics
    """
    if stats.mean.shape[0] != table.n_entities:
        raise ConfigurationError(
            f"normalization statistics cover {stats.mean.shape[0]} entities, "
            f"data has {table.n_entities}"
        )
    values = (table.values - stats.mean[:, None]) / stats.scale[:, None]
    # constant entities map to exactly zero rather than float residue
    values[stats.std < stats.epsilon] = 0.0
    return table.model_copy(update={"values": values})
