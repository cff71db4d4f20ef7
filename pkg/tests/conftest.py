"""
Pytest configuration and fixtures for fairaudit tests.
"""

from collections.abc import Callable, Mapping, Sequence
from typing import Any

import numpy as np
import pandas as pd
import pytest

from fairaudit.core.models import Dataset, TaskKind
from fairaudit.dataset.synthetic import AttributeSpec, SynthConfig


DatasetFactory = Callable[..., Dataset]


def _dataset(
    features: Any,
    targets: Any,
    protected: Mapping[str, Sequence[Any]],
    task_kind: TaskKind = TaskKind.ADOPTION,
    feature_names: Sequence[str] | None = None,
    label_names: Sequence[str] | None = None,
) -> Dataset:
    X = np.asarray(features, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    return Dataset(
        features=X,
        targets=Y,
        protected=pd.DataFrame(dict(protected)),
        task_kind=task_kind,
        feature_names=tuple(feature_names or (f"x{j + 1}" for j in range(X.shape[1]))),
        label_names=tuple(label_names or (f"y{k + 1}" for k in range(Y.shape[1]))),
    )


@pytest.fixture
def make_dataset() -> DatasetFactory:
    """Factory for hand-built datasets: (features, targets, protected columns)."""
    return _dataset


@pytest.fixture
def tiny_dataset() -> Dataset:
    """
    Eight rows, two labels, gender x age with one unspecified age.

    Hand-checked counts by gender, label a: f tp=1 fp=1 fn=1 tn=1,
    m tp=2 fp=1 tn=1; label b: f tp=1 tn=2 fn=1, m tp=3 tn=1.
    """
    return _dataset(
        features=[[0, 1], [1, 0], [2, 1], [3, 0], [4, 1], [5, 0], [6, 1], [7, 0]],
        targets=[[1, 0], [0, 0], [1, 1], [0, 1], [1, 0], [1, 1], [0, 1], [0, 1]],
        protected={
            "gender": ["f", "f", "f", "f", "m", "m", "m", "m"],
            "age": ["young", "old", "young", "old", "young", "old", "young", None],
        },
        feature_names=("x1", "x2"),
        label_names=("a", "b"),
    )


@pytest.fixture
def tiny_predictions() -> np.ndarray:
    """Decisions for ``tiny_dataset`` matching the counts in its docstring."""
    return np.array(
        [[1, 0], [1, 0], [0, 1], [0, 0], [1, 0], [1, 1], [1, 1], [0, 1]], dtype=float
    )


def planted_dataset(n: int = 1200, seed: int = 0) -> Dataset:
    """
    Two groups with a planted selection gap on the first label.

    Feature x1 is shifted by 1.5 for group b and drives label y1, so any model
    using x1 selects group b far more often. Label y2 depends on x2 only.
    """
    rng = np.random.default_rng(seed)
    group = np.where(rng.random(n) < 0.5, "a", "b")
    region = rng.choice(["north", "south"], size=n)
    x1 = rng.standard_normal(n) + 1.5 * (group == "b")
    x2 = rng.standard_normal(n)
    x3 = rng.standard_normal(n)
    y1 = (x1 + 0.5 * rng.standard_normal(n) > 0.75).astype(float)
    y2 = (x2 + 0.5 * rng.standard_normal(n) > 0.0).astype(float)
    return _dataset(
        features=np.column_stack([x1, x2, x3]),
        targets=np.column_stack([y1, y2]),
        protected={"group": group, "region": region},
        feature_names=("x1", "x2", "x3"),
        label_names=("y1", "y2"),
    )


@pytest.fixture
def planted() -> Dataset:
    """1200 rows with a large selection-rate gap on y1 between groups a and b."""
    return planted_dataset()


@pytest.fixture
def make_planted() -> Callable[..., Dataset]:
    """Factory for the planted-gap dataset: (n, seed)."""
    return planted_dataset


@pytest.fixture
def synth_config() -> SynthConfig:
    """Small generator configuration with two attributes and three labels."""
    return SynthConfig(
        n=600,
        p=6,
        n_labels=3,
        label_rates=(0.2, 0.3, 0.25),
        attributes=(
            AttributeSpec("gender", ("female", "male"), (0.5, 0.5), unspecified_rate=0.05),
            AttributeSpec("age", ("<=40", ">40")),
        ),
        seed=7,
    )
