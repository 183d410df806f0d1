"""Tests for checkpoint persistence."""

import json

import numpy as np
import pytest

from entityflow.checkpoint import MAGIC, load_checkpoint, read_checkpoint_header, save_checkpoint
from entityflow.core.exceptions import ConfigurationError, DataError, ParseError
from entityflow.detector import score
from entityflow.models import FlowModel
from entityflow.pipeline import train_model


@pytest.fixture
def trained(synthetic_table, tiny_config):
    result, prepared = train_model(synthetic_table, tiny_config, progress=False)
    return result, prepared


@pytest.fixture
def saved(tmp_path, trained, tiny_config):
    result, _ = trained
    path = tmp_path / "model.ckpt"
    save_checkpoint(str(path), result.model, tiny_config, train_scores=result.train_scores)
    return path


class TestCheckpointRoundTrip:
    """save then load."""

    def test_scores_are_bit_identical(self, saved, trained):
        """A loaded model scores exactly like the one in memory."""
        result, prepared = trained
        checkpoint = load_checkpoint(str(saved))
        windows = prepared.windows["test"]
        before = score(result.model, windows)
        after = score(checkpoint.model, windows)
        np.testing.assert_array_equal(before.entity_scores, after.entity_scores)
        np.testing.assert_array_equal(before.window_scores, after.window_scores)

    def test_metadata_restored(self, saved, trained, tiny_config):
        """Config, entities, targets, statistics and training scores come back."""
        result, _ = trained
        checkpoint = load_checkpoint(str(saved))
        assert checkpoint.version == 1
        assert checkpoint.config.train == tiny_config.train
        assert checkpoint.config.data == tiny_config.data
        assert checkpoint.entities == result.model.entities
        np.testing.assert_array_equal(checkpoint.model.targets.means, result.model.targets.means)
        np.testing.assert_array_equal(checkpoint.model.norm_stats.mean, result.model.norm_stats.mean)
        np.testing.assert_array_equal(checkpoint.model.norm_stats.std, result.model.norm_stats.std)
        np.testing.assert_array_equal(
            checkpoint.train_scores.window_scores, result.train_scores.window_scores
        )
        np.testing.assert_array_equal(checkpoint.train_scores.starts, result.train_scores.starts)
        assert not checkpoint.model.training

    def test_header(self, saved, trained):
        """The header carries the version, flat config and entity names."""
        header = read_checkpoint_header(str(saved))
        assert header["version"] == "1"
        assert header["window"] == "8"
        assert header["no_graph"] == "false"
        assert json.loads(header["entities"]) == trained[0].model.entities
        assert saved.read_bytes().startswith(MAGIC + b"version=1\n")

    def test_saves_are_byte_identical(self, tmp_path, saved, trained, tiny_config):
        """Saving the same model twice gives the same bytes."""
        result, _ = trained
        again = tmp_path / "again.ckpt"
        save_checkpoint(str(again), result.model, tiny_config, train_scores=result.train_scores)
        assert again.read_bytes() == saved.read_bytes()

    def test_explicit_state(self, tmp_path, trained, tiny_config):
        """A given state is stored instead of the model's parameters."""
        result, _ = trained
        path = tmp_path / "final.ckpt"
        save_checkpoint(str(path), result.model, tiny_config, state=result.final_state)
        restored = load_checkpoint(str(path)).model.state_dict()
        for name, value in result.final_state.items():
            np.testing.assert_array_equal(restored[name], value)

    def test_without_train_scores(self, tmp_path, trained, tiny_config):
        """Missing training scores load as an empty series."""
        result, _ = trained
        path = tmp_path / "bare.ckpt"
        save_checkpoint(str(path), result.model, tiny_config)
        checkpoint = load_checkpoint(str(path))
        assert checkpoint.train_scores.n_windows == 0
        assert checkpoint.train_scores.entity_scores.shape == (0, 3)

    def test_model_without_statistics(self, tmp_path, tiny_config):
        """Models must carry normalization statistics to be saved."""
        model = FlowModel(2, tiny_config.train)
        with pytest.raises(ConfigurationError):
            save_checkpoint(str(tmp_path / "x.ckpt"), model, tiny_config)


class TestCheckpointErrors:
    """Malformed files."""

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(str(tmp_path / "absent.ckpt"))

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "plain.ckpt"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ParseError, match="not an entityflow checkpoint"):
            load_checkpoint(str(path))

    def test_truncated(self, tmp_path, saved):
        path = tmp_path / "cut.ckpt"
        path.write_bytes(saved.read_bytes()[:-12])
        with pytest.raises(ParseError, match="truncated"):
            load_checkpoint(str(path))

    def test_unsupported_version(self, tmp_path, saved):
        path = tmp_path / "future.ckpt"
        path.write_bytes(saved.read_bytes().replace(b"version=1\n", b"version=2\n", 1))
        with pytest.raises(ParseError, match="version"):
            load_checkpoint(str(path))

    def test_unterminated_header(self, tmp_path):
        path = tmp_path / "short.ckpt"
        path.write_bytes(MAGIC + b"version=1\nwindow=8\n")
        with pytest.raises(ParseError, match="not terminated"):
            read_checkpoint_header(str(path))

    def test_malformed_header_line(self, tmp_path):
        path = tmp_path / "odd.ckpt"
        path.write_bytes(MAGIC + b"version=1\nwindow\n\n")
        with pytest.raises(ParseError, match="malformed header line"):
            read_checkpoint_header(str(path))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
