"""Single-file versioned checkpoints.

Layout:

    ENTITYFLOW-CHECKPOINT\\n
    version=1\\n
    key=value\\n ...          (config and metadata, values without newlines)
    \\n                       (blank line ends the header)
    uint32 array count
    per array: uint16 name length, UTF-8 name, uint8 ndim,
               ndim x uint64 extents, little-endian float64 data

Arrays are written in sorted name order and nothing time-dependent is
stored, so identical models give byte-identical files.
"""

import json
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from entityflow.config import EntityFlowConfig
from entityflow.core.data_model import NormStats, ScoreSeries
from entityflow.core.exceptions import ConfigurationError, DataError, ParseError
from entityflow.models.flow import EntityTargets
from entityflow.models.model import FlowModel
from entityflow.utils.file_validator import FileValidator
from entityflow.utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"ENTITYFLOW-CHECKPOINT\n"
FORMAT_VERSION = 1


class Checkpoint(BaseModel):
    """A restored model with the configuration and training-split scores it was saved with."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    version: int = FORMAT_VERSION
    config: EntityFlowConfig
    model: FlowModel
    train_scores: ScoreSeries

    @property
    def entities(self):
        return self.model.entities


def save_checkpoint(
    filepath: str,
    model: FlowModel,
    config: EntityFlowConfig,
    train_scores: Optional[ScoreSeries] = None,
    state: Optional[Dict[str, np.ndarray]] = None,
) -> Path:
    """
    Write ``model`` to ``filepath``.

    Args:
        filepath: Output path
        model: Model providing entities, targets and normalization statistics
        config: Full configuration; its train section must match the model
        train_scores: Training-split scores for threshold fitting
        state: Parameter arrays to store instead of the model's current ones

    Returns:
        The written path
    """
    if model.norm_stats is None:
        raise ConfigurationError("model has no normalization statistics to store")
    stats = model.norm_stats
    header = {"version": str(FORMAT_VERSION)}
    header.update(config.to_flat())
    header["entities"] = json.dumps(model.entities)
    header["norm_fit_start"] = str(stats.fit_start)
    header["norm_fit_stop"] = str(stats.fit_stop)
    header["norm_epsilon"] = repr(stats.epsilon)

    k = model.n_entities
    if train_scores is None:
        train_scores = ScoreSeries(
            window_scores=np.zeros(0), entity_scores=np.zeros((0, k)), starts=np.zeros(0)
        )
    params = state or model.state_dict()
    arrays: Dict[str, np.ndarray] = {f"params/{name}": value for name, value in params.items()}
    arrays["targets/mu"] = model.targets.means
    arrays["norm/mean"] = stats.mean
    arrays["norm/std"] = stats.std
    arrays["scores/window"] = train_scores.window_scores
    arrays["scores/entity"] = train_scores.entity_scores
    arrays["scores/starts"] = np.asarray(train_scores.starts, dtype=np.float64)

    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        for key, value in header.items():
            f.write(f"{key}={value}\n".encode("utf-8"))
        f.write(b"\n")
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            _write_array(f, name, arrays[name])
    logger.info(f"Checkpoint written: {path}")
    return path


def _write_array(f: BinaryIO, name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    array = np.ascontiguousarray(array, dtype="<f8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", array.ndim))
    f.write(struct.pack(f"<{array.ndim}Q", *array.shape))
    f.write(array.tobytes())


def _read_exact(f: BinaryIO, n: int, path: Path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ParseError(f"{path}: checkpoint is truncated")
    return data


def read_checkpoint_header(filepath: str) -> Dict[str, str]:
    """
    Read only the text header.

    Raises:
        DataError: If the file is missing
        ParseError: If the magic line or header is malformed
    """
    path = Path(filepath)
    with _open_checkpoint(path) as f:
        return _read_header(f, path)


def _open_checkpoint(path: Path) -> BinaryIO:
    validator = FileValidator(path)
    if not validator.validate_exists():
        raise DataError(f"Checkpoint not found: {path}")
    if validator.detect_by_magic_number() != "checkpoint":
        raise ParseError(f"{path}: not an entityflow checkpoint")
    f = open(path, "rb")
    f.seek(len(MAGIC))
    return f


def _read_header(f: BinaryIO, path: Path) -> Dict[str, str]:
    header: Dict[str, str] = {}
    while True:
        line = f.readline()
        if not line:
            raise ParseError(f"{path}: header is not terminated")
        text = line.decode("utf-8").rstrip("\n")
        if not text:
            break
        if "=" not in text:
            raise ParseError(f"{path}: malformed header line '{text}'")
        key, value = text.split("=", 1)
        header[key] = value
    version = header.get("version")
    if version != str(FORMAT_VERSION):
        raise ParseError(f"{path}: unsupported checkpoint version {version!r}, expected {FORMAT_VERSION}")
    return header


def load_checkpoint(filepath: str) -> Checkpoint:
    """
    Restore a checkpoint written by :func:`save_checkpoint`.

    Raises:
        DataError: If the file is missing
        ParseError: If the file is truncated or malformed
    """
    path = Path(filepath)
    with _open_checkpoint(path) as f:
        header = _read_header(f, path)
        (count,) = struct.unpack("<I", _read_exact(f, 4, path))
        arrays: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, path))
            name = _read_exact(f, name_len, path).decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(f, 1, path))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, path))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read_exact(f, 8 * size, path), dtype="<f8")
            arrays[name] = data.astype(np.float64).reshape(shape)

    reserved = {"version", "entities", "norm_fit_start", "norm_fit_stop", "norm_epsilon"}
    try:
        config = EntityFlowConfig.from_flat({k: v for k, v in header.items() if k not in reserved})
        entities = json.loads(header["entities"])
        stats = NormStats(
            mean=arrays["norm/mean"],
            std=arrays["norm/std"],
            fit_start=int(header["norm_fit_start"]),
            fit_stop=int(header["norm_fit_stop"]),
            epsilon=float(header["norm_epsilon"]),
        )
        model = FlowModel(len(entities), config.train, entities=entities, norm_stats=stats)
        model.load_state_dict(
            {name[len("params/"):]: value for name, value in arrays.items() if name.startswith("params/")}
        )
        model.targets = EntityTargets(arrays["targets/mu"])
        scores = ScoreSeries(
            window_scores=arrays["scores/window"],
            entity_scores=arrays["scores/entity"],
            starts=arrays["scores/starts"].astype(np.int64),
        )
    except (KeyError, ValueError, ConfigurationError) as e:
        raise ParseError(f"{path}: inconsistent checkpoint contents: {e}")

    model.eval()
    logger.info(f"Loaded checkpoint {path.name}: K={model.n_entities}, T={config.train.window}")
    return Checkpoint(version=FORMAT_VERSION, config=config, model=model, train_scores=scores)
