"""Metric tables for any mix of classification and regression metrics."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError
from fairaudit.core.models import IntersectionIndex, MetricId, MetricTable, TaskKind
from fairaudit.metrics.classification import classification_tables
from fairaudit.metrics.confusion import confusion
from fairaudit.metrics.regression import regression_group_metrics


def check_metrics(metric_ids: Sequence[MetricId], task_kind: TaskKind) -> None:
    """Classification metrics need binary targets, regression metrics real ones."""
    for metric_id in metric_ids:
        if metric_id.is_regression == task_kind.is_classification:
            raise DataValidationError(
                f"Metric '{metric_id.value}' is not defined for {task_kind.value} tasks",
                field="metric",
            )


def metric_tables(
    y_true: NDArray[np.float64],
    y_pred: NDArray[np.float64],
    idx: IntersectionIndex,
    metric_ids: Sequence[MetricId],
    task_kind: TaskKind,
    label_names: Sequence[str] | None = None,
) -> dict[MetricId, MetricTable]:
    """One MetricTable per requested metric, in the requested order."""
    check_metrics(metric_ids, task_kind)
    if task_kind.is_classification:
        counts = confusion(y_true, y_pred, idx, label_names)
        return classification_tables(counts, metric_ids)
    tables = regression_group_metrics(y_true, y_pred, idx, label_names)
    return {m: tables[m] for m in metric_ids}
