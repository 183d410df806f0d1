"""The full detector model: graph, temporal encoder, condition and flow."""

from typing import List, NamedTuple, Optional

import numpy as np

from entityflow.config import TrainConfig
from entityflow.core.base_module import BaseModule
from entityflow.core.data_model import NormStats
from entityflow.core.exceptions import DimensionError
from entityflow.diffcore import Tensor
from entityflow.models.attention import GraphAttention
from entityflow.models.condition import SpatioTemporalCondition, per_entity_condition
from entityflow.models.flow import LOG_2PI, EntityTargets, FlowStack, gaussian_terms
from entityflow.models.temporal import LSTMEncoder


class FlowTerms(NamedTuple):
    """Per-(window, entity) flow outputs, rows ordered window-major."""

    z: Tensor  # (B*K) x T
    logdet: Tensor  # B*K
    entity_index: np.ndarray  # B*K


class FlowModel(BaseModule):
    """
    Jointly trained graph attention, LSTM, condition and flow.

    All trainable parameters live under the paths ``attention/``,
    ``temporal/``, ``condition/`` and ``flow/``. Target means, normalization
    statistics and the configuration travel with the model but are not
    trained.

    Args:
        n_entities: K
        config: Sizes, seed and ablation flags
        entities: Entity names, defaults to entity_1..entity_K
        norm_stats: Statistics the training data was normalized with
    """

    def __init__(
        self,
        n_entities: int,
        config: Optional[TrainConfig] = None,
        entities: Optional[List[str]] = None,
        norm_stats: Optional[NormStats] = None,
    ):
        super().__init__()
        config = config or TrainConfig()
        rng = np.random.default_rng(config.seed)
        t = config.window
        self.config = config
        self.n_entities = n_entities
        self.entities = list(entities) if entities else [f"entity_{i + 1}" for i in range(n_entities)]
        self.norm_stats = norm_stats

        self.attention = self.add_module("attention", GraphAttention(t, config.dropout, rng))
        self.encoder = self.add_module("temporal", LSTMEncoder(config.hidden_size, rng))
        self.condition = self.add_module(
            "condition", SpatioTemporalCondition(config.hidden_size, config.condition_size, rng)
        )
        self.flow = self.add_module(
            "flow",
            FlowStack(t, config.n_blocks, config.made_hidden, t * config.condition_size, rng),
        )
        self.targets = EntityTargets.draw(n_entities, rng, single_target=config.single_target)

    def adjacency(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        """A^c per window; the identity when the graph is ablated."""
        if self.config.no_graph:
            b, k, _ = x.shape
            return Tensor(np.broadcast_to(np.eye(k), (b, k, k)))
        return self.attention(x, rng=rng)

    def forward(self, values: np.ndarray, rng: Optional[np.random.Generator] = None) -> FlowTerms:
        """
        Push B x K x T windows through the whole model.

        Args:
            values: Normalized windows
            rng: Dropout generator, needed in training mode
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1:] != (self.n_entities, self.config.window):
            raise DimensionError(
                f"model expects B x {self.n_entities} x {self.config.window} windows, got {values.shape}"
            )
        b, k, t = values.shape
        x = Tensor(values)
        adjacency = self.adjacency(x, rng)
        hidden = self.encoder(x)
        condition = per_entity_condition(self.condition(hidden, adjacency))
        z, logdet = self.flow(x.reshape(b * k, t), condition)
        return FlowTerms(z=z, logdet=logdet, entity_index=np.tile(np.arange(k), b))

    def objective_terms(self, values: np.ndarray, rng: Optional[np.random.Generator] = None) -> Tensor:
        """-1/2 ||z - mu_k||^2 + logdet per (window, entity), as a B x K tensor."""
        terms = self.forward(values, rng)
        b = values.shape[0]
        return gaussian_terms(terms.z, terms.logdet, self.targets.means[terms.entity_index]).reshape(
            b, self.n_entities
        )

    def entity_log_likelihood(self, values: np.ndarray) -> np.ndarray:
        """log P_{X_k}(x_k^c) for every window and entity (B x K), in eval mode."""
        was_training = self.training
        self.eval()
        try:
            terms = self.objective_terms(values).numpy()
        finally:
            self.train(was_training)
        return terms - 0.5 * self.config.window * LOG_2PI

    def __repr__(self) -> str:
        flags = []
        if self.config.no_graph:
            flags.append("no_graph")
        if self.config.single_target:
            flags.append("single_target")
        return (
            f"FlowModel(K={self.n_entities}, T={self.config.window}, "
            f"blocks={self.config.n_blocks}, flags={flags})"
        )
