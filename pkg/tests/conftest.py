"""Shared fixtures: tiny model sizes and a small synthetic dataset."""

import numpy as np
import pytest

from entityflow.config import EntityFlowConfig, SynthConfig, TrainConfig
from entityflow.dataio import synth_generate, write_series

TINY_TRAIN = {
    "window": 8,
    "stride": 4,
    "batch_size": 16,
    "epochs": 2,
    "n_blocks": 1,
    "hidden_size": 4,
    "condition_size": 3,
    "made_hidden": 8,
    "seed": 0,
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(**TINY_TRAIN)


@pytest.fixture
def tiny_config():
    return EntityFlowConfig().with_overrides(TINY_TRAIN)


@pytest.fixture(scope="session")
def synthetic_table():
    return synth_generate(SynthConfig(n_entities=3, length=240, anomaly_rate=0.05, seed=7))


@pytest.fixture
def synthetic_csv(tmp_path, synthetic_table):
    path = tmp_path / "plant.csv"
    write_series(synthetic_table, str(path))
    return path
