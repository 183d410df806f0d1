"""Data models for series, windows, scores and reports."""

from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

LABEL_COLUMN = "label"
TIMESTAMP_COLUMN = "timestamp"


class SeriesTable(BaseModel):
    """K entities observed over L timesteps, with optional labels and timestamps."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    entities: List[str]
    values: np.ndarray  # K x L
    labels: Optional[np.ndarray] = None  # L booleans, True = anomalous
    timestamps: Optional[np.ndarray] = None  # L monotone integers

    @field_validator("values", "labels", "timestamps", mode="before")
    @classmethod
    def _as_array(cls, value):
        return None if value is None else np.asarray(value)

    @model_validator(mode="after")
    def _check_shapes(self) -> "SeriesTable":
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be K x L, got shape {values.shape}")
        k, length = values.shape
        if k < 1 or k != len(self.entities):
            raise ValueError(f"{len(self.entities)} entity names for {k} value rows")
        if length < 2:
            raise ValueError(f"series needs at least 2 timesteps, got {length}")
        self.values = values
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=bool)
            if self.labels.shape != (length,):
                raise ValueError(f"labels length {self.labels.shape} does not match L={length}")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
            if self.timestamps.shape != (length,):
                raise ValueError(f"timestamps length {self.timestamps.shape} does not match L={length}")
            if np.any(np.diff(self.timestamps) <= 0):
                raise ValueError("timestamps must be strictly increasing")
        return self

    @property
    def n_entities(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "SeriesTable":
        """Contiguous time slice [start, stop)."""
        return SeriesTable(
            entities=list(self.entities),
            values=self.values[:, start:stop],
            labels=None if self.labels is None else self.labels[start:stop],
            timestamps=None if self.timestamps is None else self.timestamps[start:stop],
        )

    def without_labels(self) -> "SeriesTable":
        return self.model_copy(update={"labels": None})

    def to_dataframe(self) -> pd.DataFrame:
        """One row per timestep; entity columns in order, then ``label``."""
        df = pd.DataFrame(self.values.T, columns=self.entities)
        if self.timestamps is not None:
            df.insert(0, TIMESTAMP_COLUMN, self.timestamps)
        if self.labels is not None:
            df[LABEL_COLUMN] = self.labels.astype(int)
        return df

    def to_csv(self, filepath: str) -> None:
        """Write the CSV contract read by ``dataio.load_series``."""
        self.to_dataframe().to_csv(Path(filepath), index=False, float_format="%.17g")

    def __str__(self) -> str:
        labeled = "labeled" if self.labels is not None else "unlabeled"
        return f"SeriesTable(K={self.n_entities}, L={self.length}, {labeled})"


class NormStats(BaseModel):
    """Per-entity z-score statistics and the index range they were fitted on."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean: np.ndarray
    std: np.ndarray  # population standard deviation
    fit_start: int
    fit_stop: int
    epsilon: float = 1e-8

    @property
    def scale(self) -> np.ndarray:
        """Divisor actually used: ``max(std, epsilon)``."""
        return np.maximum(self.std, self.epsilon)


class WindowBatch(BaseModel):
    """N windows of shape K x T cut from one series."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray  # N x K x T
    starts: np.ndarray  # N window start indices
    labels: Optional[np.ndarray] = None  # N booleans

    @property
    def n_windows(self) -> int:
        return self.values.shape[0]

    @property
    def n_entities(self) -> int:
        return self.values.shape[1]

    @property
    def window(self) -> int:
        return self.values.shape[2]

    def subset(self, indices) -> "WindowBatch":
        indices = np.asarray(indices, dtype=np.int64)
        return WindowBatch(
            values=self.values[indices],
            starts=self.starts[indices],
            labels=None if self.labels is None else self.labels[indices],
        )

    def without_labels(self) -> "WindowBatch":
        return WindowBatch(values=self.values, starts=self.starts)


class ScoreSeries(BaseModel):
    """Window scores S_c and per-entity scores S_ck."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    window_scores: np.ndarray  # N
    entity_scores: np.ndarray  # N x K
    starts: np.ndarray  # N

    @property
    def n_windows(self) -> int:
        return self.window_scores.shape[0]


class ThresholdSet(BaseModel):
    """Global threshold and per-entity thresholds with their multipliers."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    global_threshold: float
    entity_thresholds: np.ndarray  # K
    global_lambda: float = 1.0
    entity_lambdas: np.ndarray = Field(default_factory=lambda: np.zeros(0))


class AnomalyReport(BaseModel):
    """Scores, thresholds, flags and AUROC for one scored split."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    entities: List[str]
    scores: ScoreSeries
    thresholds: ThresholdSet
    window_flags: np.ndarray  # N booleans
    entity_flags: np.ndarray  # N x K booleans
    labels: Optional[np.ndarray] = None
    auroc: Optional[float] = None
    auroc_note: Optional[str] = None

    def to_dataframe(self) -> pd.DataFrame:
        columns = {
            "window_start": self.scores.starts.astype(np.int64),
            "S_c": self.scores.window_scores,
            "flag": self.window_flags.astype(int),
        }
        for k in range(len(self.entities)):
            columns[f"S_c{k + 1}"] = self.scores.entity_scores[:, k]
        for k in range(len(self.entities)):
            columns[f"flag_{k + 1}"] = self.entity_flags[:, k].astype(int)
        if self.labels is not None:
            columns[LABEL_COLUMN] = self.labels.astype(int)
        return pd.DataFrame(columns)

    def to_csv(self, filepath: str) -> None:
        self.to_dataframe().to_csv(Path(filepath), index=False, float_format="%.17g")

    def summary(self) -> str:
        """Plain-text block with AUROC, thresholds and flag counts."""
        lines = [f"windows: {self.scores.n_windows}"]
        if self.auroc is not None:
            lines.append(f"AUROC: {self.auroc:.6f}")
        elif self.auroc_note:
            lines.append(f"AUROC: undefined ({self.auroc_note})")
        lines.append(f"global_threshold: {self.thresholds.global_threshold:.6f}")
        lines.append(f"flagged_windows: {int(self.window_flags.sum())}")
        for k, name in enumerate(self.entities):
            lines.append(
                f"entity {k + 1} ({name}): threshold {self.thresholds.entity_thresholds[k]:.6f}, "
                f"flagged {int(self.entity_flags[:, k].sum())}"
            )
        if self.labels is not None:
            lines.append(f"labeled_anomalous_windows: {int(self.labels.sum())}")
        return "\n".join(lines)

    def __str__(self) -> str:
        return (
            f"AnomalyReport(windows={self.scores.n_windows}, "
            f"flagged={int(self.window_flags.sum())}, auroc={self.auroc})"
        )
