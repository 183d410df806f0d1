"""Configuration management for entityflow.

Defaults mirror the published hyperparameters: window 60, stride 10,
Adam at 0.002, 40 epochs, entity threshold multiplier 0.8.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from entityflow.core.exceptions import ConfigurationError


class TrainConfig(BaseModel):
    """Model sizes and optimization settings."""

    window: int = Field(default=60, ge=1)
    stride: int = Field(default=10, ge=1)
    batch_size: int = Field(default=256, ge=1)
    learning_rate: float = Field(default=0.002, gt=0)
    epochs: int = Field(default=40, ge=0)
    n_blocks: int = Field(default=2, ge=1)
    hidden_size: int = Field(default=32, ge=1)
    condition_size: int = Field(default=32, ge=1)
    made_hidden: int = Field(default=64, ge=1)
    dropout: float = Field(default=0.2, ge=0, lt=1)
    seed: int = 0
    no_graph: bool = False
    single_target: bool = False


class DataConfig(BaseModel):
    """Split and normalization settings."""

    train_ratio: float = Field(default=0.6, gt=0, le=1)
    val_ratio: float = Field(default=0.2, ge=0, lt=1)
    normalize_on: Literal["train", "full"] = "train"

    @model_validator(mode="after")
    def _check_ratios(self) -> "DataConfig":
        if self.train_ratio + self.val_ratio > 1 + 1e-12:
            raise ValueError(
                f"train_ratio + val_ratio must not exceed 1, got {self.train_ratio + self.val_ratio}"
            )
        return self


class DetectorConfig(BaseModel):
    """Threshold multipliers."""

    global_lambda: float = Field(default=1.0, gt=0)
    entity_lambda: float = Field(default=0.8, gt=0)
    entity_lambdas: Optional[List[float]] = None

    def lambdas_for(self, n_entities: int) -> List[float]:
        """Per-entity multipliers, the override list when given."""
        if self.entity_lambdas is None:
            return [self.entity_lambda] * n_entities
        if len(self.entity_lambdas) != n_entities:
            raise ConfigurationError(
                f"entity_lambdas has {len(self.entity_lambdas)} values for {n_entities} entities"
            )
        return list(self.entity_lambdas)


class SynthConfig(BaseModel):
    """Synthetic dataset settings."""

    n_entities: int = Field(default=3, ge=1)
    length: int = Field(default=2000, ge=2)
    anomaly_rate: float = Field(default=0.05, ge=0, le=0.3)
    kinds: List[str] = Field(default_factory=lambda: ["spike", "level_shift", "decorrelate"])
    noise: float = Field(default=0.1, gt=0)
    seed: int = 7


class LoggingConfig(BaseModel):
    """Logging configuration, built from the global CLI flags."""

    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    log_file: Optional[Path] = None
    log_to_console: bool = True

    @classmethod
    def from_flags(
        cls, verbose: bool = False, quiet: bool = False, log_file: Optional[str] = None
    ) -> "LoggingConfig":
        """``--verbose`` wins over ``--quiet``; quiet keeps errors only."""
        level = "DEBUG" if verbose else ("ERROR" if quiet else "INFO")
        return cls(level=level, log_file=Path(log_file) if log_file else None)


PRESETS: Dict[str, Dict[str, Any]] = {
    "swat": {"n_blocks": 1, "batch_size": 512},
    "wadi": {"n_blocks": 2, "batch_size": 256},
    "small": {"n_blocks": 1, "batch_size": 64, "hidden_size": 16, "condition_size": 16, "made_hidden": 32},
}

# sections that travel in flat key=value files and checkpoint headers
_FLAT_SECTIONS = ("train", "data", "detector")
_LIST_FIELDS = {"entity_lambdas"}


class EntityFlowConfig(BaseModel):
    """Main configuration for entityflow."""

    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)

    @classmethod
    def field_sections(cls) -> Dict[str, str]:
        """Map each flat key to the section that owns it."""
        sections = {}
        for section in _FLAT_SECTIONS:
            model = cls.model_fields[section].annotation
            for name in model.model_fields:
                sections[name] = section
        return sections

    def with_overrides(self, overrides: Mapping[str, Any]) -> "EntityFlowConfig":
        """
        Return a copy with flat-key overrides applied and validated.

        Args:
            overrides: Field name to value; strings are coerced by pydantic

        Raises:
            ConfigurationError: On unknown keys or invalid values
        """
        sections = self.field_sections()
        data = self.model_dump()
        for key, value in overrides.items():
            if key not in sections:
                raise ConfigurationError(
                    f"unknown configuration key '{key}'. Known keys: {', '.join(sorted(sections))}"
                )
            if key in _LIST_FIELDS and isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()] or None
            data[sections[key]][key] = value
        try:
            return EntityFlowConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"invalid configuration: {e}")

    def with_preset(self, name: str) -> "EntityFlowConfig":
        preset = PRESETS.get(name.lower())
        if preset is None:
            raise ConfigurationError(
                f"Preset '{name}' not found. Available presets: {', '.join(PRESETS)}"
            )
        return self.with_overrides(preset)

    def to_flat(self) -> Dict[str, str]:
        """Flat key=value strings for the train, data and detector sections."""
        flat = {}
        for key, section in self.field_sections().items():
            value = getattr(getattr(self, section), key)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, list):
                text = ",".join(repr(float(v)) for v in value)
            elif value is None:
                text = ""
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            flat[key] = text
        return flat

    @classmethod
    def from_flat(cls, flat: Mapping[str, str]) -> "EntityFlowConfig":
        cleaned = {key: (None if value == "" else value) for key, value in flat.items()}
        return cls().with_overrides(cleaned)

    @classmethod
    def from_file(cls, filepath: Path) -> "EntityFlowConfig":
        """Load a flat ``key=value`` file on top of the defaults."""
        return cls().with_overrides(read_flat_file(filepath))

    def to_file(self, filepath: Path) -> None:
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", encoding="utf-8") as f:
            for key, value in self.to_flat().items():
                f.write(f"{key}={value}\n")


def read_flat_file(filepath: Path) -> Dict[str, str]:
    """
    Parse a ``key=value`` text file; ``#`` starts a comment.

    Raises:
        ConfigurationError: If the file is missing or a line has no ``=``
    """
    path = Path(filepath)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {filepath}")
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{filepath}:{line_number}: expected key=value, got '{line}'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values
