"""CSV reader and writer for multivariate series.

File contract: a header row with entity names, an optional leading
``timestamp`` column, an optional trailing ``label`` column of 0/1, one row
per timestep, UTF-8 with ``.`` as decimal separator.
"""

import csv
from pathlib import Path

import numpy as np
import pandas as pd

from entityflow.core.data_model import LABEL_COLUMN, TIMESTAMP_COLUMN, SeriesTable
from entityflow.core.exceptions import DataError, ParseError
from entityflow.utils.file_validator import validate_file
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)


def load_series(filepath: str) -> SeriesTable:
    """
    Read a series CSV.

    Args:
        filepath: Path to the CSV file

    Returns:
        SeriesTable with entity columns in file order

    Raises:
        DataError: If the file does not exist
        ParseError: On empty files, ragged rows or non-numeric cells

    Example:
        >>> table = load_series("plant.csv")
        >>> table.n_entities, table.length
        (3, 2000)
    """
    path = Path(filepath)
    if not path.exists():
        raise DataError(f"File not found: {filepath}")
    valid, messages = validate_file(path)
    if not valid:
        raise DataError(f"{filepath}: " + "; ".join(m for m in messages.splitlines() if m.startswith("✗")))

    _check_row_widths(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ParseError(f"{filepath}: file is empty")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(f"{filepath}: {e}")

    columns = [str(c).strip() for c in df.columns]
    df.columns = columns
    timestamps = None
    labels = None
    if columns and columns[0] == TIMESTAMP_COLUMN:
        timestamps = _numeric_column(df, TIMESTAMP_COLUMN, filepath)
        if np.any(timestamps != np.round(timestamps)):
            raise ParseError(f"{filepath}: timestamps must be integers")
        columns = columns[1:]
    if columns and columns[-1] == LABEL_COLUMN:
        raw = _numeric_column(df, LABEL_COLUMN, filepath)
        bad = np.flatnonzero((raw != 0) & (raw != 1))
        if bad.size:
            raise ParseError(f"{filepath}:{bad[0] + 2}: label must be 0 or 1")
        labels = raw.astype(bool)
        columns = columns[:-1]
    if not columns:
        raise ParseError(f"{filepath}: no entity columns")

    values = np.vstack([_numeric_column(df, name, filepath) for name in columns])
    try:
        table = SeriesTable(entities=columns, values=values, labels=labels, timestamps=timestamps)
    except ValueError as e:
        raise ParseError(f"{filepath}: {e}")

    logger.info(f"Loaded {path.name}: K={table.n_entities}, L={table.length}")
    return table


def _check_row_widths(path: Path) -> None:
    """Reject ragged rows, reporting the 1-based line number."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise ParseError(f"{path}: file is empty")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, found {len(row)}"
                )


def _numeric_column(df: pd.DataFrame, name: str, filepath) -> np.ndarray:
    """Parse a text column exactly; the first bad or non-finite cell is reported by line."""
    text = df[name].str.strip()
    try:
        column = text.astype(np.float64).to_numpy()
    except ValueError:
        column = None
    located = column
    if located is None:
        located = pd.to_numeric(text, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(located))
    if bad.size:
        row = bad[0]
        raise ParseError(
            f"{filepath}:{row + 2}: non-numeric value '{df[name].iloc[row]}' in column '{name}'"
        )
    if column is None:
        raise ParseError(f"{filepath}: could not parse column '{name}'")
    return column


def write_series(table: SeriesTable, filepath: str) -> None:
    """Write ``table`` in the format ``load_series`` reads."""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(str(path))
    logger.info(f"Wrote {path.name}: K={table.n_entities}, L={table.length}")
