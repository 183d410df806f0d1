"""Joint maximum-likelihood training of all model components."""

import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from entityflow.config import TrainConfig
from entityflow.core.data_model import NormStats, ScoreSeries, WindowBatch
from entityflow.core.exceptions import DivergenceError, NumericError, UsageError
from entityflow.dataio.windows import iter_batches
from entityflow.detector import score
from entityflow.diffcore import Adam, Tape, Tensor
from entityflow.models.model import FlowModel
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    wall_seconds: float


class TrainingLog(BaseModel):
    """Per-epoch losses."""

    records: List[EpochRecord] = Field(default_factory=list)

    def to_dataframe(self) -> pd.DataFrame:
        columns = ["epoch", "train_loss", "val_loss", "wall_seconds"]
        return pd.DataFrame([r.model_dump() for r in self.records], columns=columns)

    def to_csv(self, filepath: str) -> None:
        path = Path(filepath)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_dataframe().to_csv(path, index=False, float_format="%.10g")


class TrainResult(BaseModel):
    """Selected model, final-epoch parameters, epoch log and training-split scores."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: FlowModel
    final_state: Dict[str, np.ndarray]
    log: TrainingLog
    train_scores: ScoreSeries
    best_epoch: int = 0


def loss(batch: WindowBatch, model: FlowModel, rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Mean negative objective over windows and entities.

    -(1 / (B K)) sum_c sum_k [-1/2 ||z_k^c - mu_k||^2 + logdet_k^c]. The
    -T/2 log(2 pi) constant is left out; it does not move the gradients.

    Raises:
        NumericError: If the loss is not finite
    """
    return -model.objective_terms(batch.values, rng).mean()


def evaluate_loss(windows: WindowBatch, model: FlowModel, batch_size: int = 256) -> float:
    """Loss in eval mode without recording, averaged over all windows."""
    if windows.n_windows == 0:
        raise UsageError("cannot evaluate the loss of an empty window set")
    was_training = model.training
    model.eval()
    try:
        total = 0.0
        for batch in iter_batches(windows, batch_size):
            total += loss(batch, model).item() * batch.n_windows
    finally:
        model.train(was_training)
    return total / windows.n_windows


def train(
    train_windows: WindowBatch,
    config: Optional[TrainConfig] = None,
    val_windows: Optional[WindowBatch] = None,
    entities: Optional[List[str]] = None,
    norm_stats: Optional[NormStats] = None,
    progress: bool = True,
) -> TrainResult:
    """
    Train a FlowModel on unlabeled windows.

    Each epoch shuffles the windows with a seeded generator and takes one
    Adam step per mini-batch. The epoch with the lowest validation loss
    (training loss when there is no validation data) is selected; with zero
    epochs the freshly initialized model is returned.

    Args:
        train_windows: Normalized training windows; labels are ignored
        config: Sizes, optimizer settings, seed and ablation flags
        val_windows: Normalized validation windows, may be None or empty
        entities: Entity names stored with the model
        norm_stats: Normalization statistics stored with the model
        progress: Show a tqdm bar over epochs

    Returns:
        TrainResult

    Raises:
        UsageError: If there are no training windows
        DivergenceError: If the loss turns non-finite; ``last_good`` holds
            the parameters at the end of the last finite epoch and
            ``train_scores`` their training-split scores
    """
    config = config or TrainConfig()
    if train_windows.n_windows == 0:
        raise UsageError("training split has no windows; lower the window size or add data")
    train_windows = train_windows.without_labels()
    has_val = val_windows is not None and val_windows.n_windows > 0
    if has_val:
        val_windows = val_windows.without_labels()
    else:
        logger.warning("No validation windows; selecting the epoch with the lowest training loss")

    model = FlowModel(train_windows.n_entities, config, entities=entities, norm_stats=norm_stats)
    optimizer = Adam(model.named_parameters(), learning_rate=config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])

    log = TrainingLog()
    best_state = model.state_dict()
    best_loss = np.inf
    best_epoch = 0
    last_good = best_state

    logger.info(
        f"Training on {train_windows.n_windows} windows "
        f"({val_windows.n_windows if has_val else 0} validation) for {config.epochs} epochs"
    )
    for epoch in tqdm(range(1, config.epochs + 1), desc="Training", unit="epoch", disable=not progress):
        started = time.perf_counter()
        model.train()
        total = 0.0
        try:
            for batch in iter_batches(train_windows, config.batch_size, shuffle_rng):
                optimizer.zero_grad()
                with Tape() as tape:
                    batch_loss = loss(batch, model, dropout_rng)
                tape.backward(batch_loss)
                optimizer.step()
                total += batch_loss.item() * batch.n_windows
                logger.debug(f"epoch {epoch}: batch loss {batch_loss.item():.6f}")
            train_loss = total / train_windows.n_windows
            val_loss = evaluate_loss(val_windows, model, config.batch_size) if has_val else None
        except NumericError as e:
            model.load_state_dict(last_good)
            model.eval()
            try:
                rescued_scores = score(model, train_windows, batch_size=config.batch_size)
            except NumericError:
                rescued_scores = None
            raise DivergenceError(
                f"training diverged in epoch {epoch}: {e}",
                last_good=model,
                epoch=epoch - 1,
                train_scores=rescued_scores,
            )

        record = EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            wall_seconds=time.perf_counter() - started,
        )
        log.records.append(record)
        logger.info(
            f"epoch {epoch}: train_loss={train_loss:.6f}"
            + (f" val_loss={val_loss:.6f}" if val_loss is not None else "")
        )

        last_good = model.state_dict()
        selection = val_loss if val_loss is not None else train_loss
        if selection < best_loss:
            best_loss = selection
            best_state = last_good
            best_epoch = epoch

    final_state = model.state_dict()
    model.load_state_dict(best_state)
    model.eval()
    train_scores = score(model, train_windows, batch_size=config.batch_size)
    logger.info(f"Selected epoch {best_epoch} (selection loss {best_loss:.6f})")
    return TrainResult(
        model=model,
        final_state=final_state,
        log=log,
        train_scores=train_scores,
        best_epoch=best_epoch,
    )
