"""Tests for configuration loading and precedence."""

import logging

import pytest

from entityflow.cli import _build_config
from entityflow.config import PRESETS, DetectorConfig, EntityFlowConfig, LoggingConfig, read_flat_file
from entityflow.core.exceptions import ConfigurationError
from entityflow.utils.logger import PACKAGE_LOGGER, get_logger, setup_logger


class TestEntityFlowConfig:
    """Tests for EntityFlowConfig."""

    def test_defaults(self):
        """Defaults follow the published settings."""
        config = EntityFlowConfig()
        assert config.train.window == 60
        assert config.train.stride == 10
        assert config.train.learning_rate == 0.002
        assert config.train.epochs == 40
        assert config.train.batch_size == 256
        assert config.detector.global_lambda == 1.0
        assert config.detector.entity_lambda == 0.8
        assert config.data.normalize_on == "train"
        assert not config.train.no_graph and not config.train.single_target

    def test_overrides_are_coerced(self):
        """String values from files and flags are validated into their types."""
        config = EntityFlowConfig().with_overrides({"window": "12", "dropout": "0.1", "no_graph": "true"})
        assert config.train.window == 12
        assert config.train.dropout == 0.1
        assert config.train.no_graph is True

    def test_unknown_key(self):
        """Unknown keys list the known ones."""
        with pytest.raises(ConfigurationError, match="unknown configuration key 'windwo'"):
            EntityFlowConfig().with_overrides({"windwo": 10})

    @pytest.mark.parametrize(
        "overrides",
        [{"window": 0}, {"learning_rate": -1.0}, {"dropout": 1.0}, {"normalize_on": "test"}],
    )
    def test_invalid_values(self, overrides):
        """Out-of-range values are configuration errors."""
        with pytest.raises(ConfigurationError):
            EntityFlowConfig().with_overrides(overrides)

    def test_split_ratios_must_fit(self):
        """train_ratio + val_ratio may not exceed one."""
        with pytest.raises(ConfigurationError):
            EntityFlowConfig().with_overrides({"train_ratio": 0.9, "val_ratio": 0.2})

    def test_presets(self):
        """Presets set block count and batch size."""
        swat = EntityFlowConfig().with_preset("swat")
        assert (swat.train.n_blocks, swat.train.batch_size) == (1, 512)
        wadi = EntityFlowConfig().with_preset("WADI")
        assert (wadi.train.n_blocks, wadi.train.batch_size) == (2, 256)
        assert set(PRESETS) == {"swat", "wadi", "small"}

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError, match="Available presets"):
            EntityFlowConfig().with_preset("msl")

    def test_entity_lambdas_from_text(self):
        """A comma list becomes per-entity multipliers."""
        config = EntityFlowConfig().with_overrides({"entity_lambdas": "1.0, 0.5,0.7"})
        assert config.detector.entity_lambdas == [1.0, 0.5, 0.7]
        assert config.detector.lambdas_for(3) == [1.0, 0.5, 0.7]
        with pytest.raises(ConfigurationError):
            config.detector.lambdas_for(2)

    def test_uniform_entity_lambda(self):
        assert DetectorConfig(entity_lambda=0.9).lambdas_for(2) == [0.9, 0.9]

    def test_flat_round_trip(self):
        """to_flat and from_flat preserve every flat field."""
        config = EntityFlowConfig().with_overrides(
            {"window": 30, "learning_rate": 0.0015, "single_target": True, "entity_lambdas": [0.8, 1.1]}
        )
        flat = config.to_flat()
        assert flat["single_target"] == "true"
        assert flat["entity_lambdas"] == "0.8,1.1"
        restored = EntityFlowConfig.from_flat(flat)
        assert restored.train == config.train
        assert restored.data == config.data
        assert restored.detector == config.detector

    def test_file_round_trip(self, tmp_path):
        """to_file and from_file agree."""
        config = EntityFlowConfig().with_overrides({"stride": 3, "val_ratio": 0.1})
        path = tmp_path / "run.conf"
        config.to_file(path)
        assert EntityFlowConfig.from_file(path).model_dump() == config.model_dump()


class TestFlatFiles:
    """Tests for key=value files."""

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "a.conf"
        path.write_text("# sizes\nwindow = 20\n\nepochs=5  # short run\n", encoding="utf-8")
        assert read_flat_file(path) == {"window": "20", "epochs": "5"}

    def test_line_without_equals(self, tmp_path):
        path = tmp_path / "b.conf"
        path.write_text("window=20\nepochs\n", encoding="utf-8")
        with pytest.raises(ConfigurationError, match=":2:"):
            read_flat_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            read_flat_file(tmp_path / "none.conf")


class TestPrecedence:
    """Defaults < preset < config file < flags."""

    def test_layers(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("batch_size=32\nepochs=5\n", encoding="utf-8")
        config = _build_config("small", str(path), {"epochs": 3, "window": None})
        assert config.train.epochs == 3
        assert config.train.batch_size == 32
        assert config.train.hidden_size == 16
        assert config.train.window == 60

    def test_no_layers(self):
        assert _build_config(None, None, {}) == EntityFlowConfig()


class TestLoggingConfig:
    """Tests for logging flags and logger setup."""

    @pytest.fixture(autouse=True)
    def restore_logger(self):
        yield
        package = logging.getLogger(PACKAGE_LOGGER)
        for handler in list(package.handlers):
            package.removeHandler(handler)
            handler.close()

    @pytest.mark.parametrize(
        "verbose, quiet, level",
        [(False, False, "INFO"), (True, False, "DEBUG"), (False, True, "ERROR"), (True, True, "DEBUG")],
    )
    def test_levels_from_flags(self, verbose, quiet, level):
        assert LoggingConfig.from_flags(verbose=verbose, quiet=quiet).level == level

    def test_unknown_level(self):
        with pytest.raises(ValueError):
            LoggingConfig(level="TRACE")

    def test_file_handler_writes(self, tmp_path):
        path = tmp_path / "logs" / "run.log"
        logger = setup_logger(LoggingConfig(level="DEBUG", log_file=path, log_to_console=False))
        assert logger.level == logging.DEBUG
        get_logger("entityflow.trainer").debug("epoch 1 done")
        for handler in logger.handlers:
            handler.flush()
        assert "entityflow.trainer - DEBUG - epoch 1 done" in path.read_text(encoding="utf-8")

    def test_repeated_setup_replaces_handlers(self, tmp_path):
        config = LoggingConfig.from_flags(log_file=str(tmp_path / "run.log"))
        setup_logger(config)
        logger = setup_logger(config)
        assert len(logger.handlers) == 2
        assert logger.level == logging.INFO


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
