""" Fixtures for efcml tests. """
import numpy as np
import pytest

from efcml.config import LearnConfig
from efcml.ingest import load_arff

from .common import fixture_path, two_cluster_stream
from .const import TOY_CONFIG


@pytest.fixture()
def toy_config():
    """Learner config for small synthetic streams."""
    return LearnConfig.from_dict(TOY_CONFIG)


@pytest.fixture()
def tiny_dataset():
    """Handcrafted two-label dataset."""
    return load_arff(fixture_path("tiny.arff"), fixture_path("tiny.xml"))


@pytest.fixture()
def two_clusters():
    """Features and labels of two separated clusters."""
    return two_cluster_stream()


@pytest.fixture()
def rng():
    """Seeded generator."""
    return np.random.default_rng(1234)
