"""Per-(label, group) confusion counts."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError, ShapeMismatchError
from fairaudit.core.models import ConfusionCounts, IntersectionIndex


def label_names_for(n_labels: int, names: Sequence[str] | None = None) -> tuple[str, ...]:
    """Given names, or ``label_1 .. label_K``."""
    if names is None:
        return tuple(f"label_{k + 1}" for k in range(n_labels))
    if len(names) != n_labels:
        raise ShapeMismatchError(f"Expected {n_labels} label names, got {len(names)}")
    return tuple(str(n) for n in names)


def as_label_matrix(values: NDArray[np.float64], name: str) -> NDArray[np.float64]:
    """Promote a vector to an n x 1 matrix; reject anything that is not 1-D or 2-D."""
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        return array[:, None]
    if array.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 1-D or 2-D, got shape {array.shape}")
    return array


def check_aligned(
    y_true: NDArray[np.float64],
    y_pred: NDArray[np.float64],
    idx: IntersectionIndex,
) -> None:
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(
            f"Targets have shape {y_true.shape} but predictions have {y_pred.shape}"
        )
    if y_true.shape[0] != idx.n_rows:
        raise ShapeMismatchError(
            f"Targets have {y_true.shape[0]} rows but the index covers {idx.n_rows}"
        )


def confusion(
    targets: NDArray[np.float64],
    preds: NDArray[np.float64],
    idx: IntersectionIndex,
    label_names: Sequence[str] | None = None,
) -> ConfusionCounts:
    """
    Exact tp/fp/tn/fn per (label, group).

    Each row is coded as 2*y + y_hat and tabulated per group with one
    bincount per label, so counts are additive over groups by construction.
    """
    y = as_label_matrix(targets, "targets")
    y_hat = as_label_matrix(preds, "preds")
    check_aligned(y, y_hat, idx)
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataValidationError("Targets must be 0 or 1", field="targets")
    if not np.all(np.isin(y_hat, (0.0, 1.0))):
        raise DataValidationError("Predictions must be 0 or 1", field="preds")

    K = y.shape[1]
    L = idx.n_groups
    groups = idx.row_groups
    shape = (K, L)
    tn, fp, fn, tp = (np.zeros(shape, dtype=np.int64) for _ in range(4))
    for k in range(K):
        code = 2 * y[:, k].astype(np.intp) + y_hat[:, k].astype(np.intp)
        table = np.bincount(groups * 4 + code, minlength=4 * L).reshape(L, 4)
        tn[k], fp[k], fn[k], tp[k] = table[:, 0], table[:, 1], table[:, 2], table[:, 3]

    return ConfusionCounts(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        label_names=label_names_for(K, label_names),
        group_keys=idx.groups,
        flagged=idx.flagged,
    )
