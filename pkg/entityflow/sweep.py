"""Grid sweeps over training settings, scored by AUROC on a labeled split."""

import itertools
import time
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from entityflow.config import EntityFlowConfig
from entityflow.core.data_model import SeriesTable
from entityflow.core.exceptions import ConfigurationError, NumericError, UndefinedMetricError, UsageError
from entityflow.detector import auroc, score
from entityflow.pipeline import train_model
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)

# columns of a sweep frame that are not grid keys
RESULT_COLUMNS = ("run", "seed", "auroc", "n_windows", "wall_seconds", "error")

STUDIES: Dict[str, Dict[str, List[Any]]] = {
    # window length against flow depth
    "robustness": {"window": [40, 60, 80, 100, 120], "n_blocks": [1, 2, 3]},
    # larger training splits carry more contamination; everything after them is tested
    "train_ratio": {"train_ratio": [0.6, 0.65, 0.7, 0.75, 0.8], "val_ratio": [0.0]},
}


def parse_grid(items: Sequence[str]) -> Dict[str, List[str]]:
    """
    Parse ``key=v1,v2`` entries into a grid.

    Raises:
        ConfigurationError: If an entry has no key or no values

    Example:
        >>> parse_grid(["window=40,60", "n_blocks=2"])
        {'window': ['40', '60'], 'n_blocks': ['2']}
    """
    grid: Dict[str, List[str]] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not sep or not key or not values:
            raise ConfigurationError(f"grid entries look like key=v1,v2, got '{item}'")
        grid[key] = values
    return grid


class SweepRunner:
    """
    Train and score one model per grid setting and run.

    Run ``r`` of every setting trains with seed ``base seed + r``, so all
    settings see the same seeds.

    Args:
        base: Configuration the grid values are applied to
        runs: Seeds per setting
        split: Labeled split the AUROC is computed on
        fail_fast: Re-raise the first failed run instead of recording it
    """

    def __init__(
        self,
        base: Optional[EntityFlowConfig] = None,
        runs: int = 5,
        split: str = "test",
        fail_fast: bool = False,
    ):
        if runs < 1:
            raise UsageError(f"a sweep needs at least one run per setting, got {runs}")
        if split not in ("val", "test"):
            raise UsageError(f"sweeps score the val or test split, got '{split}'")
        self.base = base or EntityFlowConfig()
        self.runs = runs
        self.split = split
        self.fail_fast = fail_fast

    def settings(self, grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
        """
        Every combination of grid values, in grid order.

        Raises:
            ConfigurationError: On unknown keys, invalid values or an empty grid
        """
        if not grid:
            raise ConfigurationError("sweep grid is empty")
        keys = list(grid)
        combos = [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]
        for combo in combos:
            self.base.with_overrides(combo)
        return combos

    def run(
        self, table: SeriesTable, grid: Mapping[str, Sequence[Any]], progress: bool = False
    ) -> pd.DataFrame:
        """
        Sweep ``grid`` on ``table``.

        Returns:
            One row per setting and run: the grid values, ``run``, ``seed``,
            ``auroc`` (NaN for failed runs), ``n_windows``, ``wall_seconds``
            and ``error``

        Raises:
            UsageError: If ``table`` has no labels
        """
        if table.labels is None:
            raise UsageError("a sweep needs a labeled series")
        settings = self.settings(grid)
        sections = EntityFlowConfig.field_sections()
        jobs = [(setting, run) for setting in settings for run in range(self.runs)]
        logger.info(f"Sweeping {len(settings)} settings x {self.runs} runs on the {self.split} split")

        rows = []
        for setting, run in tqdm(jobs, desc="Sweep", unit="run", disable=not progress):
            config = self.base.with_overrides({**setting, "seed": self.base.train.seed + run})
            row: Dict[str, Any] = {key: getattr(getattr(config, sections[key]), key) for key in setting}
            row.update(run=run, seed=config.train.seed)
            row.update(self._score_one(table, config, setting))
            rows.append(row)

        failed = sum(1 for row in rows if row["error"])
        logger.info(f"Sweep complete: {len(rows) - failed} scored, {failed} failed")
        return pd.DataFrame(rows)

    def _score_one(
        self, table: SeriesTable, config: EntityFlowConfig, setting: Mapping[str, Any]
    ) -> Dict[str, Any]:
        started = time.perf_counter()
        n_windows = 0
        try:
            result, prepared = train_model(table, config, progress=False)
            windows = prepared.windows[self.split]
            n_windows = windows.n_windows
            scores = score(result.model, windows, batch_size=config.train.batch_size)
            value = auroc(scores.window_scores, windows.labels)
            error = ""
        except (ConfigurationError, NumericError, UndefinedMetricError) as e:
            if self.fail_fast:
                raise
            logger.warning(f"Sweep run {setting} seed {config.train.seed} failed: {e}")
            value, error = np.nan, str(e)
        return {
            "auroc": value,
            "n_windows": n_windows,
            "wall_seconds": time.perf_counter() - started,
            "error": error,
        }


def summarize_sweep(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of AUROC per setting; ``runs`` counts scored runs."""
    keys = [c for c in frame.columns if c not in RESULT_COLUMNS]
    summary = frame.groupby(keys, sort=False)["auroc"].agg(["mean", "std", "count"]).reset_index()
    return summary.rename(columns={"mean": "auroc_mean", "std": "auroc_std", "count": "runs"})
