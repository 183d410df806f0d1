"""Anomaly scores, IQR thresholds, flags and AUROC."""

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from entityflow.config import DetectorConfig
from entityflow.core.data_model import AnomalyReport, ScoreSeries, ThresholdSet, WindowBatch
from entityflow.core.exceptions import DimensionError, UndefinedMetricError, UsageError
from entityflow.models.flow import LOG_2PI
from entityflow.models.model import FlowModel
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)

# fewest scores the quartile rule accepts
MIN_THRESHOLD_SCORES = 4


def score(
    model: FlowModel,
    windows: WindowBatch,
    batch_size: int = 256,
    max_workers: int = 1,
) -> ScoreSeries:
    """
    Negative log-likelihood scores, per entity and averaged per window.

    S_ck = -log P_{X_k}(x_k^c) with the Gaussian constant included and
    S_c = mean over k of S_ck. Runs in eval mode without recording.

    Args:
        model: Trained model
        windows: Normalized windows with the model's K and T
        batch_size: Windows per forward pass
        max_workers: Thread count; chunks are scored independently and
            reassembled in order, so results do not depend on it

    Returns:
        ScoreSeries aligned with ``windows``
    """
    n, k = windows.n_windows, model.n_entities
    if n == 0:
        return ScoreSeries(window_scores=np.zeros(0), entity_scores=np.zeros((0, k)), starts=windows.starts)
    if windows.values.shape[1:] != (k, model.config.window):
        raise DimensionError(
            f"windows have shape {windows.values.shape[1:]}, model expects {(k, model.config.window)}"
        )

    was_training = model.training
    model.eval()
    chunks = [windows.values[i:i + batch_size] for i in range(0, n, batch_size)]
    try:
        if max_workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                parts = list(executor.map(model.objective_terms, chunks))
        else:
            parts = [model.objective_terms(chunk) for chunk in chunks]
    finally:
        model.train(was_training)

    log_density = np.concatenate([p.numpy() for p in parts]) - 0.5 * model.config.window * LOG_2PI
    entity_scores = -log_density
    return ScoreSeries(
        window_scores=entity_scores.mean(axis=1),
        entity_scores=entity_scores,
        starts=windows.starts,
    )


def iqr_threshold(scores: Sequence[float], lam: float = 1.0) -> float:
    """
    lam * (Q3 + 1.5 * (Q3 - Q1)) with linearly interpolated quartiles.

    Raises:
        UsageError: With fewer than 4 scores
    """
    values = np.asarray(scores, dtype=np.float64).reshape(-1)
    if values.size < MIN_THRESHOLD_SCORES:
        raise UsageError(f"IQR threshold needs at least {MIN_THRESHOLD_SCORES} scores, got {values.size}")
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(lam * (q3 + 1.5 * (q3 - q1)))


def fit_thresholds(train_scores: ScoreSeries, config: Optional[DetectorConfig] = None) -> ThresholdSet:
    """Global and per-entity thresholds from training-split scores."""
    config = config or DetectorConfig()
    k = train_scores.entity_scores.shape[1]
    lambdas = np.asarray(config.lambdas_for(k), dtype=np.float64)
    return ThresholdSet(
        global_threshold=iqr_threshold(train_scores.window_scores, config.global_lambda),
        entity_thresholds=np.array(
            [iqr_threshold(train_scores.entity_scores[:, j], lambdas[j]) for j in range(k)]
        ),
        global_lambda=config.global_lambda,
        entity_lambdas=lambdas,
    )


def flag(scores: ScoreSeries, thresholds: ThresholdSet) -> Tuple[np.ndarray, np.ndarray]:
    """Window and entity flags; a score equal to its threshold is not flagged."""
    window_flags = scores.window_scores > thresholds.global_threshold
    entity_flags = scores.entity_scores > thresholds.entity_thresholds[None, :]
    return window_flags, entity_flags


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """
    Area under the ROC curve from the Mann-Whitney rank statistic.

    Ties get average ranks, so a tied positive/negative pair counts 1/2.

    Raises:
        UndefinedMetricError: If labels hold a single class
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    if scores.shape != labels.shape:
        raise DimensionError(f"{scores.size} scores for {labels.size} labels")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both anomalous and normal windows")
    ranks = pd.Series(scores).rank(method="average").to_numpy()
    u_statistic = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def build_report(
    scores: ScoreSeries,
    thresholds: ThresholdSet,
    entities: Sequence[str],
    labels: Optional[np.ndarray] = None,
) -> AnomalyReport:
    """Flag ``scores`` and attach AUROC when labels with both classes are given."""
    window_flags, entity_flags = flag(scores, thresholds)
    value, note = None, None
    if labels is not None:
        try:
            value = auroc(scores.window_scores, labels)
        except UndefinedMetricError:
            note = "single-class labels"
            logger.warning("Labels contain a single class; AUROC is undefined for this split")
    return AnomalyReport(
        entities=list(entities),
        scores=scores,
        thresholds=thresholds,
        window_flags=window_flags,
        entity_flags=entity_flags,
        labels=labels,
        auroc=value,
        auroc_note=note,
    )
