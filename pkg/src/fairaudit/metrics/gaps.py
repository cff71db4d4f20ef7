"""
Group comparisons of one metric for one label.

``fairness_gap`` compares every group to a reference; ``disparity`` is the
range max - min over the usable groups. Groups below min_support are left
out of disparities unless ``include_flagged`` is set.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError, InsufficientGroupsError, UndefinedCellError
from fairaudit.core.models import (
    CellStatus,
    ConfusionCounts,
    GroupKey,
    MetricId,
    MetricTable,
    frozen_array,
    group_name,
)
from fairaudit.metrics.classification import classification_metric


GROUP_MAX = "max"


class GapMode(Enum):
    DIFFERENCE = "difference"
    RATIO = "ratio"


GroupRef = int | str | GroupKey


@dataclass(frozen=True, eq=False)
class GapVector:
    """Per-group gap of one metric for one label against a reference."""
    metric_id: MetricId
    label: str
    mode: GapMode
    reference: str                  # group name, or "max" for the group-wise maximum
    reference_value: float
    values: NDArray[np.float64]     # length L, NaN where undefined
    status: NDArray[np.object_]
    group_keys: tuple[GroupKey, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", frozen_array(self.values))
        object.__setattr__(self, "status", frozen_array(self.status, dtype=object))

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.group_keys)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "metric": self.metric_id.value,
            "label": self.label,
            "mode": self.mode.value,
            "reference": self.reference,
            "group": list(self.group_names),
            "value": [None if np.isnan(v) else float(v) for v in self.values],
            "status": [s.value for s in self.status],
        })

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "label": self.label,
            "mode": self.mode.value,
            "reference": self.reference,
            "reference_value": self.reference_value,
            "groups": list(self.group_names),
            "values": self.values,
            "status": [s.value for s in self.status],
        }


def resolve_group(table: MetricTable, reference: GroupRef) -> int:
    """Group index from an index, a ``a|b`` name or a key tuple."""
    if isinstance(reference, (int, np.integer)) and not isinstance(reference, bool):
        if not 0 <= int(reference) < len(table.group_keys):
            raise DataValidationError(f"Group index {reference} out of range", field="reference")
        return int(reference)
    if isinstance(reference, str):
        if reference in table.group_names:
            return table.group_names.index(reference)
    elif tuple(reference) in table.group_keys:
        return table.group_keys.index(tuple(reference))
    raise DataValidationError(f"Unknown reference group {reference!r}", field="reference")


def fairness_gap(
    table: MetricTable,
    label: int | str,
    mode: GapMode | str = GapMode.DIFFERENCE,
    reference: GroupRef | None = None,
    include_flagged: bool = False,
) -> GapVector:
    """
    Gap of every group against a reference group.

    Difference mode gives value_g - value_ref, ratio mode value_g / value_ref
    (undefined everywhere when value_ref = 0). Without a reference the gaps
    are taken against the largest value among the usable groups.
    """
    mode = GapMode(mode)
    k = table.label_index(label)
    row = table.values[k]
    label_name = table.label_names[k]

    if reference is None:
        usable = table.usable(k, include_flagged)
        if not usable.any():
            raise UndefinedCellError(
                f"No defined {table.metric_id.value} cell for label '{label_name}'",
                cells=[(label_name, name) for name in table.group_names],
            )
        ref_value = float(np.max(row[usable]))
        ref_name = GROUP_MAX
    else:
        g = resolve_group(table, reference)
        ref_name = table.group_names[g]
        if np.isnan(row[g]):
            raise UndefinedCellError(
                f"Reference cell ({label_name}, {ref_name}) of {table.metric_id.value} "
                "is undefined",
                cells=[(label_name, ref_name)],
            )
        ref_value = float(row[g])

    status = table.status[k].copy()
    if mode is GapMode.DIFFERENCE:
        values = row - ref_value
    elif ref_value == 0.0:
        values = np.full_like(row, np.nan)
        status[:] = CellStatus.ZERO_DENOMINATOR
    else:
        values = row / ref_value

    return GapVector(
        metric_id=table.metric_id,
        label=label_name,
        mode=mode,
        reference=ref_name,
        reference_value=ref_value,
        values=values,
        status=status,
        group_keys=table.group_keys,
    )


@dataclass(frozen=True)
class Disparity:
    """Range of a metric across usable groups for one label."""
    metric_id: MetricId
    label: str
    value: float
    argmax: GroupKey
    argmin: GroupKey
    max_value: float
    min_value: float
    n_groups: int                        # groups that entered the range
    excluded: tuple[GroupKey, ...]       # undefined or below min_support

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "label": self.label,
            "value": self.value,
            "argmax": group_name(self.argmax),
            "argmin": group_name(self.argmin),
            "max_value": self.max_value,
            "min_value": self.min_value,
            "n_groups": self.n_groups,
            "excluded": [group_name(g) for g in self.excluded],
        }


def disparity(table: MetricTable, label: int | str, include_flagged: bool = False) -> Disparity:
    """max_g - min_g of the metric; ties resolve to the first group in group order."""
    k = table.label_index(label)
    usable = table.usable(k, include_flagged)
    if usable.sum() < 2:
        raise InsufficientGroupsError(
            f"Disparity of {table.metric_id.value} for label '{table.label_names[k]}' needs "
            f"at least 2 usable groups, got {int(usable.sum())}",
            field=table.label_names[k],
        )
    positions = np.flatnonzero(usable)
    values = table.values[k, positions]
    hi = positions[int(np.argmax(values))]
    lo = positions[int(np.argmin(values))]
    max_value = float(table.values[k, hi])
    min_value = float(table.values[k, lo])
    return Disparity(
        metric_id=table.metric_id,
        label=table.label_names[k],
        value=max_value - min_value,
        argmax=table.group_keys[hi],
        argmin=table.group_keys[lo],
        max_value=max_value,
        min_value=min_value,
        n_groups=len(positions),
        excluded=tuple(table.group_keys[g] for g in np.flatnonzero(~usable)),
    )


def equalized_odds_difference(
    counts: ConfusionCounts,
    label: int | str,
    include_flagged: bool = False,
) -> float:
    """Larger of the tpr and fpr disparities."""
    tpr = disparity(classification_metric(counts, MetricId.RECALL_TPR), label, include_flagged)
    fpr = disparity(classification_metric(counts, MetricId.FPR), label, include_flagged)
    return max(tpr.value, fpr.value)


def disparate_impact(
    counts: ConfusionCounts,
    label: int | str,
    include_flagged: bool = False,
) -> float:
    """Smallest over largest selection rate among usable groups."""
    result = disparity(
        classification_metric(counts, MetricId.SELECTION_RATE), label, include_flagged
    )
    if result.max_value == 0.0:
        raise UndefinedCellError(
            f"Every usable group has selection rate 0 for label '{result.label}'",
            cells=[(result.label, group_name(result.argmax))],
        )
    return result.min_value / result.max_value
