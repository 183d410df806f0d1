"""End-to-end steps shared by the CLI and the package-level helpers."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from entityflow.checkpoint import Checkpoint, save_checkpoint
from entityflow.config import DetectorConfig, EntityFlowConfig
from entityflow.core.data_model import AnomalyReport, NormStats, SeriesTable, WindowBatch
from entityflow.core.exceptions import ConfigurationError, UsageError
from entityflow.dataio.normalize import apply_normalize, fit_normalize
from entityflow.dataio.windows import SeriesSplit, make_windows, split_series
from entityflow.detector import MIN_THRESHOLD_SCORES, build_report, fit_thresholds, score
from entityflow.diffcore import Tensor
from entityflow.models.model import FlowModel
from entityflow.trainer import TrainResult, train
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)

SPLIT_NAMES = ("train", "val", "test", "all")


class PreparedData(BaseModel):
    """Normalized series, the statistics used and windows per split."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    table: SeriesTable
    norm_stats: NormStats
    windows: Dict[str, WindowBatch]


def empty_windows(n_entities: int, window: int, labeled: bool) -> WindowBatch:
    return WindowBatch(
        values=np.zeros((0, n_entities, window)),
        starts=np.zeros(0, dtype=np.int64),
        labels=np.zeros(0, dtype=bool) if labeled else None,
    )


def _split_windows(split: SeriesSplit, window: int, stride: int) -> WindowBatch:
    if split.table.length < window:
        logger.warning(
            f"{split.name} split has {split.table.length} steps, shorter than T={window}; no windows"
        )
        return empty_windows(split.table.n_entities, window, split.table.labels is not None)
    return make_windows(split.table, window, stride, offset=split.offset)


def prepare_training_data(table: SeriesTable, config: EntityFlowConfig) -> PreparedData:
    """
    Split, normalize and window a series for training.

    Statistics are fitted on the training split unless
    ``config.data.normalize_on`` is ``"full"``. Window starts stay global.

    Raises:
        ConfigurationError: If the training split is shorter than the window
    """
    splits = {s.name: s for s in split_series(table, config.data.train_ratio, config.data.val_ratio)}
    if "train" not in splits:
        raise ConfigurationError(f"training split of a series with L={table.length} is empty")
    train_split = splits["train"]
    logger.info(
        "Split sizes: "
        + ", ".join(f"{name}={s.table.length}" for name, s in splits.items())
    )

    if config.data.normalize_on == "full":
        fit_range = (0, table.length)
    else:
        fit_range = (train_split.offset, train_split.offset + train_split.table.length)
    normalized, stats = fit_normalize(table, fit_range)

    # same ratios, same bounds as the raw split above
    parts = {p.name: p for p in split_series(normalized, config.data.train_ratio, config.data.val_ratio)}
    t, s = config.train.window, config.train.stride
    windows = {"train": make_windows(parts["train"].table, t, s, offset=parts["train"].offset)}
    for name in ("val", "test"):
        if name in parts:
            windows[name] = _split_windows(parts[name], t, s)
        else:
            windows[name] = empty_windows(table.n_entities, t, table.labels is not None)
    return PreparedData(table=normalized, norm_stats=stats, windows=windows)


def train_model(
    table: SeriesTable, config: EntityFlowConfig, progress: bool = True
) -> Tuple[TrainResult, PreparedData]:
    """Prepare ``table`` and train on its training split, validating on the validation split.

    Raises:
        ConfigurationError: If the training split has too few windows to fit thresholds later
    """
    prepared = prepare_training_data(table, config)
    n_train = prepared.windows["train"].n_windows
    if n_train < MIN_THRESHOLD_SCORES:
        raise ConfigurationError(
            f"training split gives {n_train} windows; thresholds need at least {MIN_THRESHOLD_SCORES}. "
            "Lower the window or stride, or raise train_ratio"
        )
    result = train(
        prepared.windows["train"],
        config.train,
        val_windows=prepared.windows["val"],
        entities=table.entities,
        norm_stats=prepared.norm_stats,
        progress=progress,
    )
    return result, prepared


def final_path(path: Path) -> Path:
    """``model.ckpt`` -> ``model.final.ckpt``."""
    path = Path(path)
    return path.with_name(f"{path.stem}.final{path.suffix}")


def save_training_outputs(
    result: TrainResult,
    config: EntityFlowConfig,
    train_windows: WindowBatch,
    out_path: Path,
) -> Dict[str, Path]:
    """
    Write the selected model, the final-epoch model and the epoch log.

    Returns:
        Mapping of ``best``, ``final`` and ``log`` to written paths
    """
    out_path = Path(out_path)
    best = save_checkpoint(str(out_path), result.model, config, train_scores=result.train_scores)

    final_model = FlowModel(
        result.model.n_entities,
        config.train,
        entities=result.model.entities,
        norm_stats=result.model.norm_stats,
    )
    final_model.load_state_dict(result.final_state)
    final_model.eval()
    final_scores = score(final_model, train_windows.without_labels(), batch_size=config.train.batch_size)
    final = save_checkpoint(str(final_path(out_path)), final_model, config, train_scores=final_scores)

    log_path = out_path.with_name(f"{out_path.stem}.log.csv")
    result.log.to_csv(str(log_path))
    logger.info(f"Epoch log written: {log_path}")
    return {"best": best, "final": final, "log": log_path}


def prepare_scoring_windows(table: SeriesTable, checkpoint: Checkpoint, split: str = "all") -> WindowBatch:
    """
    Normalize ``table`` with the checkpoint's statistics and window one split of it.

    Args:
        table: Raw series with the checkpoint's entities
        checkpoint: Loaded checkpoint
        split: ``train``, ``val``, ``test`` or ``all``

    Raises:
        ConfigurationError: If the entity count or names differ from the checkpoint
        UsageError: On an unknown split name
    """
    if split not in SPLIT_NAMES:
        raise UsageError(f"unknown split '{split}', expected one of {', '.join(SPLIT_NAMES)}")
    model = checkpoint.model
    if table.n_entities != model.n_entities:
        raise ConfigurationError(
            f"checkpoint was trained on {model.n_entities} entities, data has {table.n_entities}"
        )
    if list(table.entities) != list(model.entities):
        raise ConfigurationError(
            f"entity names differ: checkpoint {model.entities}, data {table.entities}"
        )

    normalized = apply_normalize(table, model.norm_stats)
    t, s = checkpoint.config.train.window, checkpoint.config.train.stride
    if split == "all":
        if normalized.length < t:
            raise ConfigurationError(f"window T={t} is longer than the series (L={normalized.length})")
        return make_windows(normalized, t, s)

    data = checkpoint.config.data
    parts = {p.name: p for p in split_series(normalized, data.train_ratio, data.val_ratio)}
    if split not in parts:
        return empty_windows(table.n_entities, t, table.labels is not None)
    return _split_windows(parts[split], t, s)


def score_table(
    checkpoint: Checkpoint,
    table: SeriesTable,
    split: str = "all",
    detector_config: Optional[DetectorConfig] = None,
    max_workers: int = 1,
) -> AnomalyReport:
    """
    Score one split of ``table`` and flag it against thresholds fitted on
    the checkpoint's training-split scores.
    """
    windows = prepare_scoring_windows(table, checkpoint, split)
    scores = score(
        checkpoint.model,
        windows,
        batch_size=checkpoint.config.train.batch_size,
        max_workers=max_workers,
    )
    thresholds = fit_thresholds(checkpoint.train_scores, detector_config or checkpoint.config.detector)
    report = build_report(scores, thresholds, checkpoint.model.entities, labels=windows.labels)
    logger.info(f"Scored {scores.n_windows} windows of the {split} split")
    return report


def adjacency_matrices(checkpoint: Checkpoint, windows: WindowBatch, indices: Sequence[int]) -> np.ndarray:
    """Eval-mode A^c for the listed window indices, as an n x K x K array."""
    for index in indices:
        if not 0 <= index < windows.n_windows:
            raise UsageError(f"window index {index} out of range [0, {windows.n_windows})")
    model = checkpoint.model
    model.eval()
    return model.adjacency(Tensor(windows.values[list(indices)])).numpy()


def export_adjacency(
    checkpoint: Checkpoint,
    table: SeriesTable,
    indices: Sequence[int],
    out_dir: Path,
    split: str = "all",
    edge_threshold: Optional[float] = None,
) -> List[Path]:
    """
    Write ``adjacency_<index>.csv`` per window, rows and columns labeled by entity.

    With ``edge_threshold`` also writes ``edges_<index>.csv`` listing
    (source, target, weight) for entries at or above it, where source is the
    row entity.
    """
    windows = prepare_scoring_windows(table, checkpoint, split)
    matrices = adjacency_matrices(checkpoint, windows, indices)
    entities = checkpoint.model.entities
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    for index, matrix in zip(indices, matrices):
        path = out_dir / f"adjacency_{index}.csv"
        pd.DataFrame(matrix, index=entities, columns=entities).to_csv(path, float_format="%.17g")
        written.append(path)
        if edge_threshold is not None:
            rows, cols = np.nonzero(matrix >= edge_threshold)
            edges = pd.DataFrame(
                {
                    "source": [entities[r] for r in rows],
                    "target": [entities[c] for c in cols],
                    "weight": matrix[rows, cols],
                },
                columns=["source", "target", "weight"],
            )
            edge_path = out_dir / f"edges_{index}.csv"
            edges.to_csv(edge_path, index=False, float_format="%.17g")
            written.append(edge_path)
    logger.info(f"Wrote {len(written)} graph files to {out_dir}")
    return written
