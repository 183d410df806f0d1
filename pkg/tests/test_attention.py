"""Tests for the attention adjacency."""

import numpy as np
import pytest

from entityflow.core.exceptions import DimensionError, UsageError
from entityflow.diffcore import Tensor, check_parameter_gradients
from entityflow.models import GraphAttention, attention_adjacency


class TestGraphAttention:
    """Tests for GraphAttention."""

    def test_rows_are_stochastic(self, rng):
        """Eval-mode rows sum to one and entries are nonnegative."""
        attention = GraphAttention(6, rng=rng).eval()
        adjacency = attention_adjacency(rng.normal(size=(3, 4, 6)), attention)
        assert adjacency.shape == (3, 4, 4)
        np.testing.assert_allclose(adjacency.sum(axis=-1), 1.0, atol=1e-6)
        assert (adjacency >= 0).all()

    def test_identical_entities_give_uniform_rows(self, rng):
        """Entities with identical windows attend uniformly."""
        attention = GraphAttention(5, rng=rng)
        window = rng.normal(size=5)
        values = np.tile(window, (2, 3, 1))
        adjacency = attention_adjacency(values, attention)
        np.testing.assert_allclose(adjacency, 1.0 / 3.0, atol=1e-9)

    def test_single_entity(self, rng):
        """K = 1 gives [[1]]."""
        adjacency = attention_adjacency(rng.normal(size=(1, 1, 4)), GraphAttention(4, rng=rng))
        np.testing.assert_allclose(adjacency, [[[1.0]]])

    def test_windows_get_different_graphs(self, rng):
        """The graph depends on the window content."""
        attention = GraphAttention(8, rng=rng)
        adjacency = attention_adjacency(rng.normal(size=(2, 3, 8)), attention)
        assert not np.allclose(adjacency[0], adjacency[1])

    def test_two_entity_hand_example(self):
        """Identity weights on one-hot windows give sigmoid(1 / sqrt(2)) on the diagonal."""
        attention = GraphAttention(2, rng=np.random.default_rng(0)).eval()
        attention.w_query.assign(np.eye(2))
        attention.w_key.assign(np.eye(2))
        adjacency = attention_adjacency(np.eye(2)[None], attention)[0]
        diagonal = 1.0 / (1.0 + np.exp(-1.0 / np.sqrt(2.0)))
        np.testing.assert_allclose(np.diag(adjacency), [diagonal, diagonal], atol=1e-12)
        assert diagonal == pytest.approx(0.66976, abs=1e-5)

    def test_permuting_entities_permutes_graph(self, rng):
        """Reordering entities reorders rows and columns the same way."""
        attention = GraphAttention(6, rng=rng).eval()
        values = rng.normal(size=(3, 4, 6))
        order = np.array([2, 0, 3, 1])
        adjacency = attention_adjacency(values, attention)
        permuted = attention_adjacency(values[:, order], attention)
        np.testing.assert_allclose(permuted, adjacency[:, order][:, :, order], atol=1e-12)

    def test_scaling_one_entity_changes_graph(self, rng):
        """The graph responds to the data of a single entity."""
        attention = GraphAttention(6, rng=rng).eval()
        values = rng.normal(size=(1, 3, 6))
        scaled = values.copy()
        scaled[0, 1] *= 3.0
        difference = np.abs(attention_adjacency(scaled, attention) - attention_adjacency(values, attention))
        assert difference.max() > 1e-6

    def test_training_dropout(self, rng):
        """Training mode drops entries and rescales the rest by 1 / (1 - p)."""
        attention = GraphAttention(4, dropout=0.5, rng=rng)
        values = rng.normal(size=(8, 3, 4))
        clean = attention_adjacency(values, attention, training=False)
        dropped = attention_adjacency(values, attention, training=True, rng=np.random.default_rng(0))
        kept = dropped != 0
        assert (~kept).any()
        np.testing.assert_allclose(dropped[kept], clean[kept] * 2.0)

    def test_training_needs_rng(self, rng):
        """Dropout without a generator is a usage error."""
        attention = GraphAttention(4, dropout=0.2, rng=rng)
        with pytest.raises(UsageError):
            attention(Tensor(rng.normal(size=(1, 2, 4))), training=True)

    def test_wrong_window_length(self, rng):
        """Windows must have length T."""
        with pytest.raises(DimensionError):
            GraphAttention(4, rng=rng)(Tensor(np.zeros((1, 2, 5))))

    def test_parameter_gradients(self, rng):
        """Query and key gradients match finite differences."""
        attention = GraphAttention(3, rng=rng).eval()
        values = Tensor(rng.normal(size=(2, 3, 3)))
        weights = rng.normal(size=(2, 3, 3))
        errors = check_parameter_gradients(
            attention.named_parameters(), lambda: (attention(values) * weights).sum()
        )
        assert max(errors.values()) < 1e-4


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
