"""Regression metrics per (label, group)."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError
from fairaudit.core.models import REGRESSION_METRICS, IntersectionIndex, MetricId, MetricTable
from fairaudit.metrics.classification import cell_status
from fairaudit.metrics.confusion import as_label_matrix, check_aligned, label_names_for


def regression_group_metrics(
    y_true: NDArray[np.float64],
    y_pred: NDArray[np.float64],
    idx: IntersectionIndex,
    label_names: Sequence[str] | None = None,
) -> dict[MetricId, MetricTable]:
    """
    mse, mae, rmse, r2 and explained_variance for every (label, group).

    r2 is 1 - RSS/TSS with TSS taken about the group mean and is undefined
    when TSS = 0; explained_variance is 1 - Var(residual)/Var(y) and is
    undefined when Var(y) = 0. Both may be negative.
    """
    y = as_label_matrix(y_true, "y_true")
    y_hat = as_label_matrix(y_pred, "y_pred")
    check_aligned(y, y_hat, idx)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise DataValidationError("Regression targets and predictions must be finite")

    K, L = y.shape[1], idx.n_groups
    grids = {m: np.full((K, L), np.nan) for m in REGRESSION_METRICS}
    for g, rows in enumerate(idx.members):
        truth = y[rows]
        residual = truth - y_hat[rows]
        mse = np.mean(residual ** 2, axis=0)
        tss = np.sum((truth - truth.mean(axis=0)) ** 2, axis=0)
        var_y = np.var(truth, axis=0)
        grids[MetricId.MSE][:, g] = mse
        grids[MetricId.MAE][:, g] = np.mean(np.abs(residual), axis=0)
        grids[MetricId.RMSE][:, g] = np.sqrt(mse)
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = 1.0 - np.sum(residual ** 2, axis=0) / tss
            explained = 1.0 - np.var(residual, axis=0) / var_y
        grids[MetricId.R2][:, g] = np.where(tss > 0, r2, np.nan)
        grids[MetricId.EXPLAINED_VARIANCE][:, g] = np.where(var_y > 0, explained, np.nan)

    names = label_names_for(K, label_names)
    return {
        metric_id: MetricTable(
            metric_id=metric_id,
            values=grids[metric_id],
            status=cell_status(~np.isnan(grids[metric_id]), idx.flagged),
            label_names=names,
            group_keys=idx.groups,
            flagged=idx.flagged,
        )
        for metric_id in MetricId
        if metric_id in REGRESSION_METRICS
    }
