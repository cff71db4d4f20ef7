"""
Scalar summaries of a fairness tensor.

Aggregation runs over the strict upper triangle of the label axes, so every
unordered label pair of every group counts once. The magnitude schemes use
|value| because signed differences cancel; ``median`` is taken over signed
values. Undefined (NaN) cells are dropped and reported through ``coverage``.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import (
    ConfigError,
    ShapeMismatchError,
    TensorMismatchError,
    UndefinedCellError,
)
from fairaudit.core.models import FairnessTensor


logger = logging.getLogger(__name__)

HARMONIC_EPSILON = 1e-9


class AggregateScheme(Enum):
    WEIGHTED_MEAN = "weighted_mean"            # weighted mean of |value|
    MEDIAN = "median"                          # unweighted median of signed values
    HARMONIC_MEAN_ABS = "harmonic_mean_abs"    # weighted harmonic mean of |value| + eps, minus eps
    MAX_ABS = "max_abs"                        # largest |value| among positively weighted cells


Cell = tuple[str, str, str]


@dataclass(frozen=True)
class AggregateResult:
    scheme: AggregateScheme
    value: float
    n_cells: int          # label pairs across all groups
    n_defined: int        # of which defined and carrying positive weight
    argmax_cell: Cell | None = None     # (group, label_1, label_2), max_abs only

    @property
    def coverage(self) -> float:
        return self.n_defined / self.n_cells if self.n_cells else 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme.value,
            "value": self.value,
            "n_cells": self.n_cells,
            "n_defined": self.n_defined,
            "coverage": self.coverage,
            "argmax_cell": list(self.argmax_cell) if self.argmax_cell else None,
            "median_convention": "signed" if self.scheme is AggregateScheme.MEDIAN else None,
        }


def _upper_cells(
    t: FairnessTensor,
    cell_weights: NDArray[np.float64] | None,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.intp], NDArray[np.intp]]:
    L, K, _ = t.shape
    rows, cols = np.triu_indices(K, k=1)
    values = t.values[:, rows, cols]                        # L x P
    if cell_weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.asarray(cell_weights, dtype=float)
        if weights.shape != (L, K, K):
            raise ShapeMismatchError(f"Cell weights shape {weights.shape}, expected {t.shape}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ConfigError("Cell weights must be finite and non-negative", field="cell_weights")
        weights = weights[:, rows, cols]
    return values, weights, rows, cols


def aggregate(
    t: FairnessTensor,
    scheme: AggregateScheme | str = AggregateScheme.WEIGHTED_MEAN,
    cell_weights: NDArray[np.float64] | None = None,
) -> AggregateResult:
    """
    Reduce a tensor to one number.

    With K = 1 there are no label pairs and every scheme gives 0.
    """
    scheme = AggregateScheme(scheme)
    values, weights, rows, cols = _upper_cells(t, cell_weights)
    n_cells = values.size
    if n_cells == 0:
        return AggregateResult(scheme=scheme, value=0.0, n_cells=0, n_defined=0)

    defined = ~np.isnan(values)
    if not defined.any():
        raise UndefinedCellError(f"Every cell of the {t.metric_id.value} tensor is undefined")
    used = defined & (weights > 0)
    if not used.any():
        raise ConfigError("Cell weights are zero on every defined cell", field="cell_weights")

    v, w = values[used], weights[used]
    magnitude = np.abs(v)
    argmax_cell = None
    match scheme:
        case AggregateScheme.WEIGHTED_MEAN:
            value = float(np.sum(w * magnitude) / np.sum(w))
        case AggregateScheme.MEDIAN:
            value = float(np.median(v))
        case AggregateScheme.HARMONIC_MEAN_ABS:
            harmonic = np.sum(w) / np.sum(w / (magnitude + HARMONIC_EPSILON))
            value = max(0.0, float(harmonic - HARMONIC_EPSILON))
        case AggregateScheme.MAX_ABS:
            flat = np.where(used, np.abs(np.nan_to_num(values)), -1.0)
            g, p = np.unravel_index(int(np.argmax(flat)), flat.shape)
            value = float(flat[g, p])
            argmax_cell = (t.group_names[g], t.label_names[rows[p]], t.label_names[cols[p]])

    if used.sum() < n_cells:
        logger.debug(f"Aggregate {scheme.value}: {int(used.sum())}/{n_cells} cells used")
    return AggregateResult(
        scheme=scheme,
        value=value,
        n_cells=n_cells,
        n_defined=int(used.sum()),
        argmax_cell=argmax_cell,
    )


@dataclass(frozen=True, eq=False)
class TensorComparison:
    """Model B against model A: cellwise B - A plus scalar aggregates."""
    deltas: FairnessTensor
    before: AggregateResult
    after: AggregateResult

    @property
    def scalar_delta(self) -> float:
        """aggregate(B) - aggregate(A); negative means B is fairer under magnitude schemes."""
        return self.after.value - self.before.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.before.scheme.value,
            "a": self.before,
            "b": self.after,
            "scalar_delta": self.scalar_delta,
            "deltas": self.deltas,
        }


def check_comparable(a: FairnessTensor, b: FairnessTensor) -> None:
    if a.shape != b.shape:
        raise TensorMismatchError(f"Tensor shapes differ: {a.shape} vs {b.shape}", field="shape")
    if a.metric_id is not b.metric_id:
        raise TensorMismatchError(
            f"Tensor metrics differ: {a.metric_id.value} vs {b.metric_id.value}", field="metric"
        )
    if a.group_keys != b.group_keys:
        raise TensorMismatchError("Tensor group orders differ", field="groups")
    if a.label_names != b.label_names:
        raise TensorMismatchError("Tensor label orders differ", field="labels")
    if a.weighted != b.weighted:
        raise TensorMismatchError("Cannot compare a weighted with an unweighted tensor")


def compare_models(
    a: FairnessTensor,
    b: FairnessTensor,
    scheme: AggregateScheme | str = AggregateScheme.MAX_ABS,
    cell_weights: NDArray[np.float64] | None = None,
) -> TensorComparison:
    check_comparable(a, b)
    deltas = FairnessTensor(
        values=b.values - a.values,
        metric_id=a.metric_id,
        group_keys=a.group_keys,
        label_names=a.label_names,
        provenance={"a": a.provenance.get("model", "a"), "b": b.provenance.get("model", "b")},
        weighted=a.weighted,
    )
    return TensorComparison(
        deltas=deltas,
        before=aggregate(a, scheme, cell_weights),
        after=aggregate(b, scheme, cell_weights),
    )
