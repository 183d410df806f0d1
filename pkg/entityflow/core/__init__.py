"""Core data model and exceptions for entityflow."""

from entityflow.core.data_model import (
    AnomalyReport,
    NormStats,
    ScoreSeries,
    SeriesTable,
    ThresholdSet,
    WindowBatch,
)
from entityflow.core.exceptions import EntityFlowError

__all__ = [
    "AnomalyReport",
    "NormStats",
    "ScoreSeries",
    "SeriesTable",
    "ThresholdSet",
    "WindowBatch",
    "EntityFlowError",
]
