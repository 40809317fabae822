"""Helpers for tests."""
import os
from typing import Optional, Tuple

import numpy as np

from efcml.config import LearnConfig
from efcml.ingest import Dataset
from efcml.rulebase import Rule, RuleBase


def fixture_path(filename: str) -> str:
    """Absolute path of a fixture file."""
    return os.path.join(os.path.dirname(__file__), "fixtures", filename)


def make_rule(
    center,
    num_labels: int = 1,
    width: float = 1.0,
    consequents: Optional[np.ndarray] = None,
    support: int = 1,
    p_init: float = 1000.0,
) -> Rule:
    """Axis-parallel rule of the given width in input space."""
    center = np.asarray(center, dtype=np.float64)
    num_inputs = center.shape[0]
    if consequents is None:
        consequents = np.zeros((num_inputs + 1, num_labels))
    return Rule(
        center=center,
        inv_cov=np.eye(num_inputs) / width**2,
        consequents=consequents,
        support=support,
        p_init=p_init,
    )


def make_rule_base(*rules: Rule, config: Optional[LearnConfig] = None) -> RuleBase:
    """Rule base holding hand-built rules."""
    first = rules[0]
    return RuleBase(
        num_inputs=first.num_inputs,
        num_labels=first.num_labels,
        config=config or LearnConfig(),
        rules=list(rules),
    )


def two_cluster_stream(
    num_samples: int = 200, seed: int = 7, noise: float = 0.05
) -> Tuple[np.ndarray, np.ndarray]:
    """Two well separated clusters with complementary label pairs."""
    rng = np.random.default_rng(seed)
    side = rng.integers(0, 2, num_samples)
    centers = np.array([[0.2, 0.2], [0.8, 0.8]])
    features = centers[side] + noise * rng.standard_normal((num_samples, 2))
    labels = np.column_stack((side == 0, side == 1)).astype(np.int64)
    return features, labels


def linear_stream(
    num_samples: int = 300, num_inputs: int = 3, seed: int = 11
) -> Tuple[np.ndarray, np.ndarray]:
    """Single-cluster stream whose two labels follow one hyperplane."""
    rng = np.random.default_rng(seed)
    features = rng.uniform(0.0, 1.0, (num_samples, num_inputs))
    score = features.sum(axis=1) - num_inputs / 2.0
    first = (score > 0).astype(np.int64)
    return features, np.column_stack((first, first))


def as_dataset(features: np.ndarray, labels: np.ndarray) -> Dataset:
    """Wrap arrays as a dataset with generated label names."""
    return Dataset(
        features=features,
        labels=labels,
        label_names=tuple(f"label{index + 1}" for index in range(labels.shape[1])),
    )


def region_stream(
    centers, label_rows, counts, seed: int = 3, noise: float = 0.05
) -> Tuple[np.ndarray, np.ndarray]:
    """Consecutive blocks of samples around far apart centers, one label row each."""
    rng = np.random.default_rng(seed)
    features = np.concatenate(
        [
            np.asarray(center, dtype=np.float64) + noise * rng.standard_normal((count, 2))
            for center, count in zip(centers, counts)
        ]
    )
    labels = np.concatenate(
        [
            np.tile(np.asarray(row, dtype=np.int64), (count, 1))
            for row, count in zip(label_rows, counts)
        ]
    )
    return features, labels
