"""
entityflow

Unsupervised anomaly detection for multivariate time series with a
graph-conditioned normalizing flow and per-entity target distributions.
"""

from entityflow.__version__ import __version__
from entityflow.config import EntityFlowConfig
from entityflow.core.data_model import AnomalyReport, ScoreSeries, SeriesTable, WindowBatch
from entityflow.core.exceptions import EntityFlowError


def fit(filepath, config=None, out=None, progress=False):
    """
    Train a model on a series CSV.

    Args:
        filepath: Path to the series CSV
        config: Optional EntityFlowConfig, defaults are used otherwise
        out: Optional checkpoint path; when given the selected and
             final-epoch checkpoints and the epoch log are written
        progress: Show a progress bar over epochs

    Returns:
        TrainResult: Selected model, epoch log and training-split scores

    Example:
        >>> from entityflow import fit
        >>> result = fit("plant.csv", out="model.ckpt")
        >>> result.best_epoch
        37
    """
    from entityflow.dataio import load_series
    from entityflow.pipeline import save_training_outputs, train_model

    config = config or EntityFlowConfig()
    result, prepared = train_model(load_series(filepath), config, progress=progress)
    if out is not None:
        save_training_outputs(result, config, prepared.windows["train"], out)
    return result


def detect(filepath, checkpoint_path, split="all", max_workers=1):
    """
    Score a series CSV with a saved checkpoint.

    Args:
        filepath: Path to the series CSV, same entities as the checkpoint
        checkpoint_path: Path written by ``fit`` or ``entityflow train``
        split: ``train``, ``val``, ``test`` or ``all``
        max_workers: Threads used for scoring

    Returns:
        AnomalyReport: Scores, thresholds, flags and AUROC when labeled

    Example:
        >>> report = detect("plant.csv", "model.ckpt", split="test")
        >>> report.to_csv("report.csv")
    """
    from entityflow.checkpoint import load_checkpoint
    from entityflow.dataio import load_series
    from entityflow.pipeline import score_table

    checkpoint = load_checkpoint(checkpoint_path)
    return score_table(checkpoint, load_series(filepath), split=split, max_workers=max_workers)


__all__ = [
    "__version__",
    "fit",
    "detect",
    "EntityFlowConfig",
    "EntityFlowError",
    "SeriesTable",
    "WindowBatch",
    "ScoreSeries",
    "AnomalyReport",
]
