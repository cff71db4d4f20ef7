"""
Fairness through unawareness versus awareness.

The same learner is trained with and without the protected columns on the
same split; the table holds unaware minus aware for every reported metric,
so a negative value means leaving the protected attributes out helped.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import LearnerError
from fairaudit.core.models import (
    REPORTED_CLASSIFICATION_METRICS,
    Dataset,
    MetricId,
    MetricTable,
    frozen_array,
)
from fairaudit.dataset.intersections import DEFAULT_MIN_SUPPORT, derive_intersections
from fairaudit.dataset.splitting import split
from fairaudit.learners.logistic import LogisticConfig
from fairaudit.learners.multilabel import MultiLabelModel, fit_multilabel
from fairaudit.metrics.classification import classification_metric
from fairaudit.metrics.confusion import confusion


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AwarenessComparison:
    label_names: tuple[str, ...]
    metric_ids: tuple[MetricId, ...]
    held_out: NDArray[np.float64]         # K x 7, unaware - aware
    train: NDArray[np.float64]
    recall_unaware: MetricTable           # held-out per-group recall
    recall_aware: MetricTable
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "held_out", frozen_array(self.held_out))
        object.__setattr__(self, "train", frozen_array(self.train))

    def to_frame(self, part: str = "held_out") -> pd.DataFrame:
        values = self.held_out if part == "held_out" else self.train
        return pd.DataFrame(
            values, index=list(self.label_names), columns=[m.value for m in self.metric_ids]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "orientation": "unaware_minus_aware",
            "labels": list(self.label_names),
            "metrics": [m.value for m in self.metric_ids],
            "held_out": self.held_out,
            "train": self.train,
            "recall_by_group": {
                "unaware": self.recall_unaware,
                "aware": self.recall_aware,
            },
            "seed": self.seed,
        }


def _pooled_metrics(
    model: MultiLabelModel,
    ds: Dataset,
    idx_attrs: Sequence[str],
    metric_ids: Sequence[MetricId],
) -> NDArray[np.float64]:
    idx = derive_intersections(ds, idx_attrs, min_support=0)
    counts = confusion(ds.targets, model.predict(ds), idx, ds.label_names).pooled()
    return np.column_stack([classification_metric(counts, m).values[:, 0] for m in metric_ids])


def awareness_comparison(
    ds: Dataset,
    learner_cfg: LogisticConfig | None = None,
    attrs: Sequence[str] | None = None,
    seed: int = 0,
    holdout_fraction: float = 0.3,
    min_support: int = DEFAULT_MIN_SUPPORT,
    n_jobs: int = 1,
) -> AwarenessComparison:
    if not ds.task_kind.is_classification:
        raise LearnerError("awareness_comparison needs a classification dataset")
    attrs = tuple(attrs) if attrs is not None else ds.protected_names
    metric_ids = REPORTED_CLASSIFICATION_METRICS
    train, test = split(ds, holdout_fraction, seed)

    unaware = fit_multilabel(train, learner_cfg, include_protected=False, n_jobs=n_jobs)
    aware = fit_multilabel(train, learner_cfg, include_protected=True, n_jobs=n_jobs)

    def difference(part: Dataset) -> NDArray[np.float64]:
        return (
            _pooled_metrics(unaware, part, attrs, metric_ids)
            - _pooled_metrics(aware, part, attrs, metric_ids)
        )

    test_idx = derive_intersections(test, attrs, min_support)

    def recall(model: MultiLabelModel) -> MetricTable:
        counts = confusion(test.targets, model.predict(test), test_idx, test.label_names)
        return classification_metric(counts, MetricId.RECALL_TPR)

    held_out = difference(test)
    logger.info(
        f"Awareness comparison on {test.n_rows} held-out rows: mean |difference| "
        f"{np.nanmean(np.abs(held_out)):.4f}"
    )
    return AwarenessComparison(
        label_names=ds.label_names,
        metric_ids=tuple(metric_ids),
        held_out=held_out,
        train=difference(train),
        recall_unaware=recall(unaware),
        recall_aware=recall(aware),
        seed=seed,
    )
