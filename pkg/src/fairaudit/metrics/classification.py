"""
Classification metrics from confusion counts.

Every metric is a ratio of counts. A cell whose denominator is zero is
undefined: its value is NaN and its status ZERO_DENOMINATOR. Defined cells of
groups below min_support keep their value with status BELOW_MIN_SUPPORT.
"""

from collections.abc import Iterable

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError
from fairaudit.core.models import CellStatus, ConfusionCounts, MetricId, MetricTable


Ratio = tuple[NDArray[np.int64], NDArray[np.int64]]


def _fractions(counts: ConfusionCounts, metric_id: MetricId) -> Ratio:
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    n = counts.sizes
    match metric_id:
        case MetricId.SELECTION_RATE:
            return tp + fp, n
        case MetricId.ACCURACY:
            return tp + tn, n
        case MetricId.PRECISION | MetricId.PPV:
            return tp, tp + fp
        case MetricId.RECALL_TPR:
            return tp, tp + fn
        case MetricId.FPR:
            return fp, fp + tn
        case MetricId.FNR:
            return fn, tp + fn
        case MetricId.TNR:
            return tn, fp + tn
        case MetricId.OVERALL_ERROR:
            return fp + fn, n
        case MetricId.NPV:
            return tn, tn + fn
        case MetricId.F1:
            # 2PR/(P+R) == 2tp/(2tp+fp+fn); undefined unless tp > 0, which is
            # exactly when precision and recall are defined with a nonzero sum.
            denominator = np.where(tp > 0, 2 * tp + fp + fn, 0)
            return 2 * tp, denominator
    raise DataValidationError(
        f"'{metric_id.value}' is not a classification metric", field="metric"
    )


def cell_status(defined: NDArray[np.bool_], flagged: NDArray[np.bool_]) -> NDArray[np.object_]:
    """Status grid for K x L cells given which are defined and which groups are flagged."""
    status = np.full(defined.shape, CellStatus.DEFINED, dtype=object)
    status[:, flagged] = CellStatus.BELOW_MIN_SUPPORT
    status[~defined] = CellStatus.ZERO_DENOMINATOR
    return status


def classification_metric(counts: ConfusionCounts, metric_id: MetricId | str) -> MetricTable:
    """One classification metric for every (label, group) cell."""
    if isinstance(metric_id, str):
        metric_id = MetricId.parse(metric_id)
    numerator, denominator = _fractions(counts, metric_id)
    defined = denominator > 0
    values = np.full(numerator.shape, np.nan)
    np.divide(numerator, denominator, out=values, where=defined)
    return MetricTable(
        metric_id=metric_id,
        values=values,
        status=cell_status(defined, counts.flagged),
        label_names=counts.label_names,
        group_keys=counts.group_keys,
        flagged=counts.flagged,
    )


def classification_tables(
    counts: ConfusionCounts,
    metric_ids: Iterable[MetricId],
) -> dict[MetricId, MetricTable]:
    return {m: classification_metric(counts, m) for m in metric_ids}
