"""
Data-quality report.

Summarizes the readiness checks an audit starts from: how much protected
information is missing, how imbalanced the labels are, which features move
together, and which intersectional groups are too small to trust.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from fairaudit.core.models import UNSPECIFIED, Dataset
from fairaudit.dataset.intersections import DEFAULT_MIN_SUPPORT, derive_intersections


logger = logging.getLogger(__name__)

DEFAULT_CORRELATION_THRESHOLD = 0.8


@dataclass(frozen=True, eq=False)
class QualityReport:
    n_rows: int
    task_kind: str
    unspecified_rates: dict[str, float]
    label_positive_rates: dict[str, float] | None
    spend_summary: dict[str, dict[str, float]] | None
    feature_names: tuple[str, ...]
    feature_correlation: np.ndarray
    high_correlation_pairs: tuple[tuple[str, str, float], ...]
    correlation_threshold: float
    label_correlation: np.ndarray
    group_mean_deviation: dict[str, dict[str, dict[str, float]]]
    group_attributes: tuple[str, ...]
    group_sizes: tuple[tuple[str, int, bool], ...]
    min_support: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_rows": self.n_rows,
            "task_kind": self.task_kind,
            "unspecified_rates": self.unspecified_rates,
            "label_positive_rates": self.label_positive_rates,
            "spend_summary": self.spend_summary,
            "feature_correlation": {
                "features": list(self.feature_names),
                "matrix": self.feature_correlation,
            },
            "high_correlation_pairs": [
                {"feature_a": a, "feature_b": b, "r": r}
                for a, b, r in self.high_correlation_pairs
            ],
            "correlation_threshold": self.correlation_threshold,
            "label_correlation": self.label_correlation,
            "group_mean_deviation": self.group_mean_deviation,
            "groups": {
                "attributes": list(self.group_attributes),
                "min_support": self.min_support,
                "sizes": [
                    {"group": g, "size": size, "flagged": flagged}
                    for g, size, flagged in self.group_sizes
                ],
            },
        }


def data_quality_report(
    ds: Dataset,
    attrs: Sequence[str] | None = None,
    min_support: int = DEFAULT_MIN_SUPPORT,
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> QualityReport:
    """
    Build the quality report for ``ds``.

    Groups are the intersections of ``attrs`` (all protected attributes when
    omitted). Feature pairs with |r| above ``correlation_threshold`` are listed;
    constant columns have undefined correlation and never qualify.
    """
    attrs = tuple(attrs) if attrs is not None else ds.protected_names

    unspecified = {
        name: float(np.mean(ds.protected_values(name) == UNSPECIFIED))
        for name in ds.protected_names
    }

    targets = pd.DataFrame(np.asarray(ds.targets), columns=list(ds.label_names))
    if ds.task_kind.is_classification:
        positive_rates = {name: float(targets[name].mean()) for name in ds.label_names}
        spend = None
    else:
        positive_rates = None
        spend = {
            name: {
                "mean": float(targets[name].mean()),
                "std": float(targets[name].std(ddof=0)),
                "min": float(targets[name].min()),
                "median": float(targets[name].median()),
                "max": float(targets[name].max()),
                "zero_fraction": float((targets[name] == 0).mean()),
            }
            for name in ds.label_names
        }

    features = pd.DataFrame(np.asarray(ds.features), columns=list(ds.feature_names))
    feature_corr = features.corr(method="pearson").to_numpy()
    pairs = []
    for i in range(ds.n_features):
        for j in range(i + 1, ds.n_features):
            r = feature_corr[i, j]
            if np.isfinite(r) and abs(r) > correlation_threshold:
                pairs.append((ds.feature_names[i], ds.feature_names[j], float(r)))

    label_corr = targets.corr(method="pearson").to_numpy()

    # Deviation of each level's label mean from the unconditional label mean.
    overall = targets.mean()
    deviation: dict[str, dict[str, dict[str, float]]] = {}
    for name in ds.protected_names:
        by_level = targets.groupby(ds.protected_values(name)).mean()
        deviation[name] = {
            str(level): {
                label: float(by_level.loc[level, label] - overall[label])
                for label in ds.label_names
            }
            for level in by_level.index
        }

    index = derive_intersections(ds, attrs, min_support)
    sizes = tuple(
        (name, int(size), bool(flag))
        for name, size, flag in zip(index.group_names, index.sizes, index.flagged, strict=True)
    )

    logger.info(
        f"Quality report: {len(pairs)} correlated feature pairs, "
        f"{int(index.flagged.sum())}/{index.n_groups} groups below min_support"
    )
    return QualityReport(
        n_rows=ds.n_rows,
        task_kind=ds.task_kind.value,
        unspecified_rates=unspecified,
        label_positive_rates=positive_rates,
        spend_summary=spend,
        feature_names=ds.feature_names,
        feature_correlation=feature_corr,
        high_correlation_pairs=tuple(pairs),
        correlation_threshold=float(correlation_threshold),
        label_correlation=label_corr,
        group_mean_deviation=deviation,
        group_attributes=attrs,
        group_sizes=sizes,
        min_support=int(min_support),
    )
