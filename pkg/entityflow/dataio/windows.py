"""Sliding windows and contiguous dataset splits."""

from typing import Iterator, List, NamedTuple, Optional

import numpy as np

from entityflow.core.data_model import SeriesTable, WindowBatch
from entityflow.core.exceptions import ConfigurationError


class SeriesSplit(NamedTuple):
    """A contiguous part of a series and where it starts in the source."""

    name: str
    table: SeriesTable
    offset: int


def make_windows(table: SeriesTable, window: int, stride: int, offset: int = 0) -> WindowBatch:
    """
    Cut windows of length ``window`` every ``stride`` steps.

    Windows start at 0, S, 2S, ... while start + T <= L, giving
    floor((L - T) / S) + 1 windows. A window is labeled anomalous when any of
    its timesteps is. Values are read straight from the table; nothing is
    re-normalized per window.

    Args:
        table: Series to cut (usually already normalized)
        window: Window length T
        stride: Stride S
        offset: Added to the reported start indices

    Raises:
        ConfigurationError: If T > L, T < 1 or S < 1
    """
    if window < 1 or stride < 1:
        raise ConfigurationError(f"window and stride must be positive, got T={window}, S={stride}")
    if window > table.length:
        raise ConfigurationError(f"window T={window} is longer than the series (L={table.length})")

    views = np.lib.stride_tricks.sliding_window_view(table.values, window, axis=1)
    starts = np.arange(0, table.length - window + 1, stride)
    values = views[:, starts, :].transpose(1, 0, 2)

    labels = None
    if table.labels is not None:
        label_views = np.lib.stride_tricks.sliding_window_view(table.labels, window)
        labels = label_views[starts].any(axis=1)

    return WindowBatch(values=values, starts=starts + offset, labels=labels)


def window_count(length: int, window: int, stride: int) -> int:
    if window > length:
        return 0
    return (length - window) // stride + 1


def split_series(table: SeriesTable, train_ratio: float = 0.6, val_ratio: float = 0.2) -> List[SeriesSplit]:
    """
    Split a series into contiguous train, validation and test parts.

    Returns:
        List of SeriesSplit named "train", "val" and "test"; a part with
        fewer than 2 timesteps is left out
    """
    if not 0 < train_ratio <= 1 or not 0 <= val_ratio < 1 or train_ratio + val_ratio > 1 + 1e-12:
        raise ConfigurationError(f"invalid split ratios train={train_ratio}, val={val_ratio}")
    length = table.length
    train_stop = int(round(length * train_ratio))
    val_stop = min(length, train_stop + int(round(length * val_ratio)))
    bounds = [("train", 0, train_stop), ("val", train_stop, val_stop), ("test", val_stop, length)]
    return [
        SeriesSplit(name, table.slice(start, stop), start)
        for name, start, stop in bounds
        if stop - start >= 2
    ]


def iter_batches(
    batch: WindowBatch, batch_size: int, rng: Optional[np.random.Generator] = None
) -> Iterator[WindowBatch]:
    """Yield consecutive mini-batches, shuffled at window granularity when ``rng`` is given."""
    order = np.arange(batch.n_windows)
    if rng is not None:
        order = rng.permutation(batch.n_windows)
    for start in range(0, batch.n_windows, batch_size):
        yield batch.subset(order[start:start + batch_size])
