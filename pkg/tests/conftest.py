"""Shared fixtures: one small synthetic corpus and a quickly trained ensemble."""

import pytest

from aif.datagen import generate_synthetic_dataset, load_dataset
from aif.features import FeatureBackbone
from aif.train import train_ensemble


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_synthetic_dataset(out, per_category=8, seed=0, resolution=64)
    return out


@pytest.fixture(scope="session")
def splits(data_dir):
    return load_dataset(data_dir)


@pytest.fixture(scope="session")
def backbone():
    return FeatureBackbone(seed=0)


@pytest.fixture(scope="session")
def micro_ensemble(splits):
    # Undertrained on purpose; tests only need a working estimator stack.
    return train_ensemble(splits["train"], splits["val"], steps=40, seed=0)
