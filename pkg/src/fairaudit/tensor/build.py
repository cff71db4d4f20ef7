"""
Fairness tensor construction.

For a metric g evaluated per (group l, label k) the tensor is

    G[l, k1, k2] = g[l, k1] - g[l, k2]

and the stakeholder-weighted tensor uses the weighted form literally:

    G^W[l, k1, k2] = W[l, k1] * G[l, k1, k2] - W[l, k2] * G[l, k1, k2]

which equals (W[l, k1] - W[l, k2]) * G[l, k1, k2]. Equal weights within a
group therefore cancel to zero, and the weighted tensor is symmetric in the
label axes where G is antisymmetric.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import ShapeMismatchError, UndefinedCellError
from fairaudit.core.models import (
    Dataset,
    FairnessTensor,
    GroupKey,
    IntersectionIndex,
    MetricId,
    MetricTable,
    WeightMatrix,
    frozen_array,
    group_name,
)
from fairaudit.metrics.tables import metric_tables


logger = logging.getLogger(__name__)


class BuildMode(Enum):
    STRICT = "strict"    # undefined g-cells are an error
    MASKED = "masked"    # undefined g-cells leave NaN tensor cells


@dataclass(frozen=True, eq=False)
class MetricGrid:
    """g-values: one metric per (group, label); ``values`` is L x K."""
    values: NDArray[np.float64]
    metric_id: MetricId
    group_keys: tuple[GroupKey, ...]
    label_names: tuple[str, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        if values.shape != (len(self.group_keys), len(self.label_names)):
            raise ShapeMismatchError(
                f"Grid shape {values.shape}, expected "
                f"({len(self.group_keys)}, {len(self.label_names)})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @classmethod
    def from_table(
        cls,
        table: MetricTable,
        provenance: Mapping[str, str] | None = None,
    ) -> "MetricGrid":
        return cls(
            values=table.values.T,
            metric_id=table.metric_id,
            group_keys=table.group_keys,
            label_names=table.label_names,
            provenance=provenance or {},
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.group_keys)

    def undefined_cells(self) -> list[tuple[str, str]]:
        """(label, group) pairs whose value is undefined."""
        return [
            (self.label_names[k], self.group_names[g])
            for g, k in np.argwhere(np.isnan(self.values))
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "groups": list(self.group_names),
            "labels": list(self.label_names),
            "values": self.values,
        }


def metric_by_group_and_label(
    ds: Dataset,
    preds: NDArray[np.float64],
    idx: IntersectionIndex,
    metric_id: MetricId | str,
    model_id: str | None = None,
) -> MetricGrid:
    """g[l, k] for one metric, computed by the metrics module; undefined cells stay NaN."""
    if isinstance(metric_id, str):
        metric_id = MetricId.parse(metric_id)
    tables = metric_tables(ds.targets, preds, idx, [metric_id], ds.task_kind, ds.label_names)
    provenance = {"dataset": ds.fingerprint()}
    if model_id is not None:
        provenance["model"] = model_id
    return MetricGrid.from_table(tables[metric_id], provenance)


def build_tensor(
    grid: MetricGrid,
    mode: BuildMode | str = BuildMode.STRICT,
) -> FairnessTensor:
    """G[l, k1, k2] = g[l, k1] - g[l, k2], with an exact zero diagonal."""
    mode = BuildMode(mode)
    undefined = grid.undefined_cells()
    if undefined and mode is BuildMode.STRICT:
        raise UndefinedCellError(
            f"{len(undefined)} undefined {grid.metric_id.value} cells; "
            "use masked mode to drop them",
            cells=undefined,
        )
    g = grid.values
    values = g[:, :, None] - g[:, None, :]
    K = g.shape[1]
    values[:, np.arange(K), np.arange(K)] = 0.0

    if undefined:
        logger.info(f"Masked tensor: {len(undefined)} of {g.size} g-cells undefined")
    return FairnessTensor(
        values=values,
        metric_id=grid.metric_id,
        group_keys=grid.group_keys,
        label_names=grid.label_names,
        provenance={**grid.provenance, "mode": mode.value},
    )


def apply_weights(t: FairnessTensor, W: WeightMatrix) -> FairnessTensor:
    """W[l, k1] * G - W[l, k2] * G, evaluated term by term."""
    L, K, _ = t.shape
    if W.shape != (L, K):
        raise ShapeMismatchError(f"Weight matrix shape {W.shape}, expected ({L}, {K})")
    w = W.weights
    G = t.values
    values = w[:, :, None] * G - w[:, None, :] * G
    return FairnessTensor(
        values=values,
        metric_id=t.metric_id,
        group_keys=t.group_keys,
        label_names=t.label_names,
        provenance={**t.provenance, "weights": "normalized" if W.normalized else "raw"},
        weighted=True,
    )


@dataclass(frozen=True, eq=False)
class PairwiseVector:
    """g[l0, k] - g[l, k] for every group l other than the reference l0."""
    metric_id: MetricId
    label: str
    reference: GroupKey
    group_keys: tuple[GroupKey, ...]     # the compared groups, in group order
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", frozen_array(self.values))

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "label": self.label,
            "reference": group_name(self.reference),
            "groups": [group_name(g) for g in self.group_keys],
            "values": self.values,
        }


def pairwise_group_vector(
    grid: MetricGrid,
    label: int | str,
    reference: int | str | GroupKey = 0,
) -> PairwiseVector:
    """Comparison of one reference group against each other group for one label."""
    k = label if isinstance(label, int) else _index(grid.label_names, str(label), "label")
    if not 0 <= k < len(grid.label_names):
        raise ShapeMismatchError(f"Label index {k} out of range [0, {len(grid.label_names)})")
    if isinstance(reference, int):
        l0 = reference
        if not 0 <= l0 < len(grid.group_keys):
            raise ShapeMismatchError(f"Group index {l0} out of range")
    elif isinstance(reference, str):
        l0 = _index(grid.group_names, reference, "reference")
    else:
        l0 = _index(grid.group_keys, tuple(reference), "reference")

    column = grid.values[:, k]
    others = [g for g in range(len(grid.group_keys)) if g != l0]
    undefined = [g for g in [l0, *others] if np.isnan(column[g])]
    if undefined:
        raise UndefinedCellError(
            f"Undefined {grid.metric_id.value} cells for label '{grid.label_names[k]}'",
            cells=[(grid.label_names[k], grid.group_names[g]) for g in undefined],
        )
    return PairwiseVector(
        metric_id=grid.metric_id,
        label=grid.label_names[k],
        reference=grid.group_keys[l0],
        group_keys=tuple(grid.group_keys[g] for g in others),
        values=column[l0] - column[others],
    )


def _index(items: Sequence[Any], item: Any, field_name: str) -> int:
    if item not in items:
        raise ShapeMismatchError(f"Unknown {field_name} {item!r}", field=field_name)
    return list(items).index(item)
