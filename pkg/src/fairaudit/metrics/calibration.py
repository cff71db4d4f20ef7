"""
Calibration by group.

Probabilities fall into ``n_bins`` equal-width bins on [0, 1]; bins are
[lo, hi) except the last, which is closed. For every (label, group, bin) the
table holds the row count, the mean predicted probability and the observed
positive rate; empty bins hold NaN.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import ConfigError, DataValidationError
from fairaudit.core.models import GroupKey, IntersectionIndex, frozen_array, group_name
from fairaudit.metrics.confusion import as_label_matrix, check_aligned, label_names_for


DEFAULT_BINS = 10


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    """Observed-vs-predicted grid; arrays are K x L x n_bins."""
    label_names: tuple[str, ...]
    group_keys: tuple[GroupKey, ...]
    edges: NDArray[np.float64]
    counts: NDArray[np.int64]
    mean_predicted: NDArray[np.float64]
    observed_rate: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozen_array(self.edges))
        object.__setattr__(self, "counts", frozen_array(self.counts, dtype=np.int64))
        object.__setattr__(self, "mean_predicted", frozen_array(self.mean_predicted))
        object.__setattr__(self, "observed_rate", frozen_array(self.observed_rate))

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def empty(self) -> NDArray[np.bool_]:
        return self.counts == 0

    @property
    def gap(self) -> NDArray[np.float64]:
        """Observed minus predicted; NaN in empty bins."""
        return self.observed_rate - self.mean_predicted

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for k, label in enumerate(self.label_names):
            for g, key in enumerate(self.group_keys):
                for b in range(self.n_bins):
                    empty = bool(self.counts[k, g, b] == 0)
                    rows.append({
                        "label": label,
                        "group": group_name(key),
                        "bin": b,
                        "lo": float(self.edges[b]),
                        "hi": float(self.edges[b + 1]),
                        "count": int(self.counts[k, g, b]),
                        "mean_predicted": None if empty else float(self.mean_predicted[k, g, b]),
                        "observed_rate": None if empty else float(self.observed_rate[k, g, b]),
                        "empty": empty,
                    })
        return pd.DataFrame(rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": list(self.label_names),
            "groups": [group_name(g) for g in self.group_keys],
            "edges": self.edges,
            "counts": self.counts,
            "mean_predicted": self.mean_predicted,
            "observed_rate": self.observed_rate,
        }


def bin_index(probas: NDArray[np.float64], n_bins: int) -> NDArray[np.intp]:
    """min(floor(p * n_bins), n_bins - 1): the last bin is closed at 1."""
    return np.minimum(np.floor(probas * n_bins).astype(np.intp), n_bins - 1)


def calibration_by_group(
    y_true: NDArray[np.float64],
    probas: NDArray[np.float64],
    idx: IntersectionIndex,
    n_bins: int = DEFAULT_BINS,
    label_names: Sequence[str] | None = None,
) -> CalibrationTable:
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}", field="n_bins")
    y = as_label_matrix(y_true, "y_true")
    p = as_label_matrix(probas, "probas")
    check_aligned(y, p, idx)
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise DataValidationError("Probabilities must lie in [0, 1]", field="probas")

    K, L = y.shape[1], idx.n_groups
    size = L * n_bins
    counts = np.zeros((K, L, n_bins), dtype=np.int64)
    mean_predicted = np.full((K, L, n_bins), np.nan)
    observed = np.full((K, L, n_bins), np.nan)
    for k in range(K):
        cell = idx.row_groups * n_bins + bin_index(p[:, k], n_bins)
        n = np.bincount(cell, minlength=size)
        filled = n > 0
        sum_p = np.bincount(cell, weights=p[:, k], minlength=size)
        sum_y = np.bincount(cell, weights=y[:, k], minlength=size)
        mean_k = np.full(size, np.nan)
        rate_k = np.full(size, np.nan)
        mean_k[filled] = sum_p[filled] / n[filled]
        rate_k[filled] = sum_y[filled] / n[filled]
        counts[k] = n.reshape(L, n_bins)
        mean_predicted[k] = mean_k.reshape(L, n_bins)
        observed[k] = rate_k.reshape(L, n_bins)

    return CalibrationTable(
        label_names=label_names_for(K, label_names),
        group_keys=idx.groups,
        edges=np.linspace(0.0, 1.0, n_bins + 1),
        counts=counts,
        mean_predicted=mean_predicted,
        observed_rate=observed,
    )
