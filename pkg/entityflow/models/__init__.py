"""Model components."""

from entityflow.models.attention import GraphAttention, attention_adjacency
from entityflow.models.condition import SpatioTemporalCondition, build_condition
from entityflow.models.flow import EntityTargets, FlowStack, MadeLayer, log_likelihood, sample
from entityflow.models.model import FlowModel
from entityflow.models.temporal import HiddenStates, LSTMEncoder, encode

__all__ = [
    "GraphAttention",
    "attention_adjacency",
    "SpatioTemporalCondition",
    "build_condition",
    "EntityTargets",
    "FlowStack",
    "MadeLayer",
    "log_likelihood",
    "sample",
    "FlowModel",
    "HiddenStates",
    "LSTMEncoder",
    "encode",
]
