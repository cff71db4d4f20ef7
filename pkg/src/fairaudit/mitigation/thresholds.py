"""
Group-specific decision thresholds.

For every label, one threshold per intersectional group is chosen so that the
criterion rate (selection rate or true positive rate) is as equal as
possible across groups. Rates are step functions of the threshold, so the
search over each group's sorted unique scores, their midpoints and one value
above the maximum is exact.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import ConfigError, DataValidationError, ShapeMismatchError
from fairaudit.core.models import GroupKey, IntersectionIndex, frozen_array, group_name
from fairaudit.metrics.confusion import as_label_matrix, label_names_for


logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_TOLERANCE = 0.02
# Added above a group's top score so one candidate selects nobody.
SENTINEL_STEP = 1e-9


class Criterion(Enum):
    EQUAL_SELECTION_RATE = "equal_selection_rate"
    EQUAL_TPR = "equal_tpr"


@dataclass(frozen=True, eq=False)
class ThresholdPolicy:
    """Per-(label, group) thresholds; arrays are K x L like metric tables."""
    thresholds: NDArray[np.float64]
    criterion: Criterion
    label_names: tuple[str, ...]
    group_keys: tuple[GroupKey, ...]
    residual_gaps: NDArray[np.float64]      # per label, NaN with < 2 usable groups
    achieved: NDArray[np.bool_]             # per label, residual gap <= tol
    excluded: tuple[tuple[str, str], ...]   # (label, group) cells left at the default
    tol: float = DEFAULT_TOLERANCE
    default_threshold: float | None = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        thresholds = frozen_array(self.thresholds)
        if thresholds.shape != (len(self.label_names), len(self.group_keys)):
            raise ShapeMismatchError(
                f"Threshold array has shape {thresholds.shape}, expected "
                f"({len(self.label_names)}, {len(self.group_keys)})"
            )
        if np.any(thresholds < 0) or np.any(thresholds > 1):
            raise DataValidationError("Thresholds must lie in [0, 1]", field="thresholds")
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        object.__setattr__(self, "residual_gaps", frozen_array(self.residual_gaps))
        object.__setattr__(self, "achieved", frozen_array(self.achieved, dtype=bool))

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.group_keys)

    def threshold(self, label: int, key: GroupKey) -> float:
        """Threshold of a group, or the default for groups the policy does not cover."""
        if key in self.group_keys:
            return float(self.thresholds[label, self.group_keys.index(key)])
        if self.default_threshold is None:
            raise DataValidationError(
                f"Group '{group_name(key)}' has no threshold and the policy has no default",
                field=group_name(key),
            )
        return self.default_threshold

    def to_frame(self) -> pd.DataFrame:
        excluded = set(self.excluded)
        rows = [
            {
                "label": label,
                "group": name,
                "threshold": float(self.thresholds[k, g]),
                "excluded": (label, name) in excluded,
            }
            for k, label in enumerate(self.label_names)
            for g, name in enumerate(self.group_names)
        ]
        return pd.DataFrame(rows, columns=["label", "group", "threshold", "excluded"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "criterion": self.criterion.value,
            "tol": self.tol,
            "default_threshold": self.default_threshold,
            "labels": list(self.label_names),
            "groups": list(self.group_names),
            "thresholds": self.thresholds,
            "residual_gaps": self.residual_gaps,
            "achieved": self.achieved,
            "excluded": [{"label": k, "group": g} for k, g in self.excluded],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ThresholdPolicy":
        try:
            criterion = Criterion(data["criterion"])
        except ValueError:
            raise ConfigError(
                f"Unknown criterion '{data['criterion']}'", field="criterion"
            ) from None
        return cls(
            thresholds=np.asarray(data["thresholds"], dtype=float),
            criterion=criterion,
            label_names=tuple(data["labels"]),
            group_keys=tuple(tuple(name.split("|")) for name in data["groups"]),
            residual_gaps=np.array(
                [np.nan if v is None else v for v in data["residual_gaps"]], dtype=float
            ),
            achieved=np.asarray(data["achieved"], dtype=bool),
            excluded=tuple((e["label"], e["group"]) for e in data.get("excluded", ())),
            tol=float(data.get("tol", DEFAULT_TOLERANCE)),
            default_threshold=data.get("default_threshold", DEFAULT_THRESHOLD),
        )


def _candidates(scores: NDArray[np.float64]) -> NDArray[np.float64]:
    """Sorted unique scores, their midpoints and one value above the top score."""
    unique = np.unique(scores)
    midpoints = (unique[:-1] + unique[1:]) / 2.0
    sentinel = min(unique[-1] + SENTINEL_STEP, 1.0)
    return np.unique(np.concatenate([unique, midpoints, [sentinel]]))


def _rates(
    sorted_scores: NDArray[np.float64],
    thresholds: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Fraction of scores >= each threshold."""
    n = len(sorted_scores)
    return (n - np.searchsorted(sorted_scores, thresholds, side="left")) / n


def _criterion_scores(
    scores: NDArray[np.float64],
    targets: NDArray[np.float64],
    criterion: Criterion,
) -> NDArray[np.float64]:
    if criterion is Criterion.EQUAL_TPR:
        return np.sort(scores[targets == 1])
    return np.sort(scores)


def _closest(
    rates: NDArray[np.float64],
    target: NDArray[np.float64],
) -> NDArray[np.intp]:
    """
    Index into ``rates`` (non-increasing) of the rate closest to each target.

    Equally close rates resolve to the higher one; among candidates sharing a
    rate the lowest threshold is returned.
    """
    ascending = rates[::-1]
    pos = np.searchsorted(ascending, target, side="left")
    lo = np.clip(pos - 1, 0, len(ascending) - 1)
    hi = np.clip(pos, 0, len(ascending) - 1)
    pick = np.where(np.abs(ascending[hi] - target) <= np.abs(ascending[lo] - target), hi, lo)
    value = ascending[pick]
    # First (lowest-threshold) candidate holding that rate.
    return np.searchsorted(-rates, -value, side="left")


def _fit_label(
    groups: Sequence[tuple[NDArray[np.float64], NDArray[np.float64]]],
    pooled_rate: float,
) -> tuple[list[float], float]:
    """
    Thresholds for one label over groups given as (candidates, rates).

    Every achievable rate is tried as a common target; each group takes its
    closest rate. The target with the smallest range wins, ties broken by
    distance to the pooled rate at the default threshold.
    """
    targets = np.unique(np.concatenate([rates for _, rates in groups]))
    picks = np.stack([_closest(rates, targets) for _, rates in groups])
    achieved = np.stack([rates[pick] for (_, rates), pick in zip(groups, picks, strict=True)])
    ranges = achieved.max(axis=0) - achieved.min(axis=0)
    best_range = ranges.min()
    tied = np.flatnonzero(ranges <= best_range + 1e-12)
    t = int(tied[np.argmin(np.abs(targets[tied] - pooled_rate))])
    thresholds = [float(cands[pick[t]]) for (cands, _), pick in zip(groups, picks, strict=True)]
    return thresholds, float(ranges[t])


def fit_thresholds(
    probas: NDArray[np.float64],
    targets: NDArray[np.float64],
    idx: IntersectionIndex,
    criterion: Criterion | str = Criterion.EQUAL_SELECTION_RATE,
    tol: float = DEFAULT_TOLERANCE,
    label_names: Sequence[str] | None = None,
) -> ThresholdPolicy:
    """
    Choose per-group thresholds so the criterion rate has range <= tol.

    Labels already within ``tol`` at the default threshold keep it. Under
    equal_tpr a group without positives cannot be equalized; it keeps the
    default and is listed in ``excluded``.
    """
    criterion = Criterion(criterion)
    if not 0.0 <= tol <= 1.0:
        raise ConfigError(f"tol must be in [0, 1], got {tol}", field="tol")
    P = as_label_matrix(probas, "probas")
    Y = as_label_matrix(targets, "targets")
    if P.shape != Y.shape or P.shape[0] != idx.n_rows:
        raise ShapeMismatchError(
            f"probas {P.shape}, targets {Y.shape} and index of {idx.n_rows} rows disagree"
        )
    if np.any(~np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise DataValidationError("Probabilities must lie in [0, 1]", field="probas")
    names = label_names_for(P.shape[1], label_names)

    K, L = P.shape[1], idx.n_groups
    thresholds = np.full((K, L), DEFAULT_THRESHOLD)
    gaps = np.full(K, np.nan)
    excluded: list[tuple[str, str]] = []

    for k in range(K):
        usable: list[int] = []
        groups: list[tuple[NDArray[np.float64], NDArray[np.float64]]] = []
        default_rates: list[float] = []
        for g, rows in enumerate(idx.members):
            scores = _criterion_scores(P[rows, k], Y[rows, k], criterion)
            if len(scores) == 0:
                excluded.append((names[k], idx.group_names[g]))
                continue
            candidates = _candidates(scores)
            usable.append(g)
            groups.append((candidates, _rates(scores, candidates)))
            default_rates.append(float(_rates(scores, np.array([DEFAULT_THRESHOLD]))[0]))

        if len(usable) < 2:
            logger.warning(f"Label {names[k]}: fewer than 2 usable groups, thresholds unchanged")
            continue
        default_gap = max(default_rates) - min(default_rates)
        if default_gap <= tol:
            gaps[k] = default_gap
            continue

        pooled = _pooled_rate(P[:, k], Y[:, k], criterion)
        chosen, gap = _fit_label(groups, pooled)
        thresholds[k, usable] = chosen
        gaps[k] = gap
        if gap > tol:
            logger.warning(
                f"Label {names[k]}: {criterion.value} gap {gap:.4f} exceeds tol {tol} "
                f"(default gap {default_gap:.4f})"
            )
        else:
            logger.info(f"Label {names[k]}: {criterion.value} gap {default_gap:.4f} -> {gap:.4f}")

    return ThresholdPolicy(
        thresholds=thresholds,
        criterion=criterion,
        label_names=names,
        group_keys=idx.groups,
        residual_gaps=gaps,
        achieved=np.where(np.isnan(gaps), False, gaps <= tol + 1e-12),
        excluded=tuple(excluded),
        tol=tol,
    )


def _pooled_rate(
    probas: NDArray[np.float64],
    targets: NDArray[np.float64],
    criterion: Criterion,
) -> float:
    scores = _criterion_scores(probas, targets, criterion)
    if len(scores) == 0:
        return 0.0
    return float(np.mean(scores >= DEFAULT_THRESHOLD))


def apply_thresholds(
    probas: NDArray[np.float64],
    idx: IntersectionIndex,
    policy: ThresholdPolicy,
) -> NDArray[np.float64]:
    """
    Binary decisions: 1 iff proba >= the threshold of the row's (label, group).

    Groups are matched by key, so the index may come from other rows than the
    ones the policy was fitted on.
    """
    P = as_label_matrix(probas, "probas")
    if P.shape != (idx.n_rows, len(policy.label_names)):
        raise ShapeMismatchError(
            f"probas shape {P.shape}, expected ({idx.n_rows}, {len(policy.label_names)})"
        )
    if np.any(idx.row_groups < 0):
        raise DataValidationError("Every row must belong to a group", field="idx")
    per_group = np.array([
        [policy.threshold(k, key) for key in idx.groups]
        for k in range(len(policy.label_names))
    ]).reshape(len(policy.label_names), idx.n_groups)
    row_thresholds = per_group[:, idx.row_groups].T
    return (P >= row_thresholds).astype(float)
