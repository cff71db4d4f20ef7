"""
Data models for fairaudit.

This module defines the core data structures shared across the audit
pipeline. They follow frozen dataclass patterns; array fields are copied and
made read-only on construction so a model can be shared between threads.
"""

import hashlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum, auto
from functools import cached_property
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError, ShapeMismatchError


UNSPECIFIED = "unspecified"

GroupKey = tuple[str, ...]


class TaskKind(Enum):
    """Which kind of targets a dataset carries."""
    ADOPTION = "adoption"    # binary {0, 1} targets, classification
    SPENDING = "spending"    # real-valued targets, regression

    @property
    def is_classification(self) -> bool:
        return self is TaskKind.ADOPTION


class FitKind(Enum):
    """Which learner produced a LinearFit."""
    LOGISTIC = "logistic"
    OLS = "ols"
    LASSO = "lasso"
    MULTITASK_ROW = "multitask-row"


class MetricId(Enum):
    """Per-(label, group) metrics."""
    SELECTION_RATE = "selection_rate"
    ACCURACY = "accuracy"
    PRECISION = "precision"
    RECALL_TPR = "recall_tpr"
    FPR = "fpr"
    FNR = "fnr"
    TNR = "tnr"
    F1 = "f1"
    OVERALL_ERROR = "overall_error"
    PPV = "ppv"
    NPV = "npv"
    MSE = "mse"
    MAE = "mae"
    RMSE = "rmse"
    R2 = "r2"
    EXPLAINED_VARIANCE = "explained_variance"

    @property
    def is_regression(self) -> bool:
        return self in REGRESSION_METRICS

    @property
    def is_probability(self) -> bool:
        return not self.is_regression

    @classmethod
    def parse(cls, name: str) -> "MetricId":
        aliases = {"recall": cls.RECALL_TPR, "tpr": cls.RECALL_TPR}
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise DataValidationError(
                f"Unknown metric '{name}'; expected one of: {valid}", field="metric"
            ) from None


REGRESSION_METRICS = frozenset({
    MetricId.MSE, MetricId.MAE, MetricId.RMSE, MetricId.R2, MetricId.EXPLAINED_VARIANCE,
})

CLASSIFICATION_METRICS = tuple(m for m in MetricId if m not in REGRESSION_METRICS)

# Metric columns of the per-label comparison tables, in the reported order.
REPORTED_CLASSIFICATION_METRICS = (
    MetricId.SELECTION_RATE,
    MetricId.ACCURACY,
    MetricId.PRECISION,
    MetricId.FPR,
    MetricId.RECALL_TPR,
    MetricId.FNR,
    MetricId.F1,
)


class AuditStage(Enum):
    """Audit pipeline stages."""
    CREATED = auto()       # Nothing loaded
    LOADED = auto()        # Dataset loaded and validated
    TRAINED = auto()       # Baseline learners fitted
    MEASURED = auto()      # Metric tables and disparities computed
    TENSORIZED = auto()    # Fairness tensor built and aggregated
    REPORTED = auto()      # Report assembled
    ERROR = auto()         # Error state


class CellStatus(Enum):
    """Why a metric cell holds the value it does."""
    DEFINED = "ok"
    ZERO_DENOMINATOR = "zero_denominator"
    BELOW_MIN_SUPPORT = "below_min_support"   # defined, but the group is flagged


def frozen_array(values: Any, dtype: Any = float) -> NDArray[Any]:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


def group_name(key: GroupKey) -> str:
    """Render a group key as ``level|level|...``."""
    return "|".join(key)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Features, multi-label targets and protected attributes for n rows.

    ``protected`` holds one categorical column per protected attribute; the
    column categories are the attribute's level set in its documented order and
    always include the ``unspecified`` level. Missing raw values map to it.
    """
    features: NDArray[np.float64]          # n x p
    targets: NDArray[np.float64]           # n x K
    protected: pd.DataFrame                # n x d, categorical
    task_kind: TaskKind
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        targets = np.asarray(self.targets, dtype=float)

        if features.ndim != 2 or targets.ndim != 2:
            raise DataValidationError("Features and targets must be 2-D matrices")

        n, p = features.shape
        _, k = targets.shape
        d = self.protected.shape[1]

        if n < 1 or p < 1 or k < 1 or d < 1:
            raise DataValidationError(
                f"Dataset needs n, p, K, d >= 1, got n={n}, p={p}, K={k}, d={d}"
            )
        if targets.shape[0] != n or self.protected.shape[0] != n:
            raise DataValidationError(
                f"Row counts differ: features={n}, targets={targets.shape[0]}, "
                f"protected={self.protected.shape[0]}"
            )
        if len(self.feature_names) != p:
            raise DataValidationError(f"Expected {p} feature names, got {len(self.feature_names)}")
        if len(self.label_names) != k:
            raise DataValidationError(f"Expected {k} label names, got {len(self.label_names)}")

        if not np.all(np.isfinite(features)):
            raise DataValidationError("Features must be finite")
        if not np.all(np.isfinite(targets)):
            raise DataValidationError("Targets must be finite")
        if self.task_kind.is_classification:
            bad = ~np.isin(targets, (0.0, 1.0))
            if bad.any():
                col = int(np.argwhere(bad)[0][1])
                raise DataValidationError(
                    "Classification targets must be 0 or 1", field=self.label_names[col]
                )

        protected = pd.DataFrame(index=pd.RangeIndex(n))
        for name in self.protected.columns:
            protected[str(name)] = _as_protected_column(self.protected[name], str(name))

        object.__setattr__(self, "features", frozen_array(features))
        object.__setattr__(self, "targets", frozen_array(targets))
        object.__setattr__(self, "protected", protected)
        object.__setattr__(self, "feature_names", tuple(str(f) for f in self.feature_names))
        object.__setattr__(self, "label_names", tuple(str(f) for f in self.label_names))

    @property
    def n_rows(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_labels(self) -> int:
        return int(self.targets.shape[1])

    @property
    def protected_names(self) -> tuple[str, ...]:
        return tuple(str(c) for c in self.protected.columns)

    def levels(self, attribute: str) -> tuple[str, ...]:
        """Declared level set of a protected attribute, in level order."""
        self._check_attribute(attribute)
        return tuple(str(c) for c in self.protected[attribute].cat.categories)

    def observed_levels(self, attribute: str) -> tuple[str, ...]:
        counts = self.protected[attribute].value_counts(sort=False)
        return tuple(str(level) for level, c in counts.items() if c > 0)

    def protected_codes(self, attribute: str) -> NDArray[np.intp]:
        """Level index of every row for one attribute."""
        self._check_attribute(attribute)
        return np.asarray(self.protected[attribute].cat.codes, dtype=np.intp)

    def protected_values(self, attribute: str) -> NDArray[np.object_]:
        self._check_attribute(attribute)
        return np.asarray(self.protected[attribute].astype(str), dtype=object)

    def label_index(self, label: int | str) -> int:
        return resolve_label(label, self.label_names)

    def take(self, rows: Sequence[int] | NDArray[np.intp]) -> "Dataset":
        """Row subset that keeps every column and every declared level set."""
        index = np.asarray(rows, dtype=np.intp)
        return Dataset(
            features=self.features[index],
            targets=self.targets[index],
            protected=self.protected.iloc[index].reset_index(drop=True),
            task_kind=self.task_kind,
            feature_names=self.feature_names,
            label_names=self.label_names,
        )

    def fingerprint(self) -> str:
        """Stable SHA-256 over all three blocks and their names."""
        digest = hashlib.sha256()
        digest.update(self.task_kind.value.encode())
        digest.update("\x1f".join(self.feature_names + self.label_names).encode())
        digest.update(np.ascontiguousarray(self.features).tobytes())
        digest.update(np.ascontiguousarray(self.targets).tobytes())
        for name in self.protected_names:
            digest.update(name.encode())
            digest.update("\x1f".join(self.levels(name)).encode())
            codes = np.ascontiguousarray(self.protected_codes(name)).astype(np.int64)
            digest.update(codes.tobytes())
        return digest.hexdigest()[:16]

    def _check_attribute(self, attribute: str) -> None:
        if attribute not in self.protected.columns:
            raise DataValidationError(
                f"Unknown protected attribute '{attribute}'", field=attribute
            )


def _as_protected_column(column: pd.Series, name: str) -> pd.Series:
    """Coerce a column to categorical with an explicit unspecified level."""
    if isinstance(column.dtype, pd.CategoricalDtype):
        categories = [str(c) for c in column.cat.categories]
        values = column.astype(object)
    else:
        values = column.astype(object)
        categories = sorted({str(v) for v in values if not _is_missing(v)})

    values = pd.Series(
        [UNSPECIFIED if _is_missing(v) else str(v) for v in values], dtype=object
    )
    if UNSPECIFIED not in categories:
        categories.append(UNSPECIFIED)

    unknown = set(values) - set(categories)
    if unknown:
        raise DataValidationError(
            f"Protected attribute '{name}' has values outside its level set: {sorted(unknown)}",
            field=name,
        )
    return pd.Series(pd.Categorical(values, categories=categories, ordered=False))


def _is_missing(value: object) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and np.isnan(value):
        return True
    return isinstance(value, str) and value == ""


def resolve_label(label: int | str, names: Sequence[str]) -> int:
    """Turn a label index or name into an index."""
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if not 0 <= int(label) < len(names):
            raise ShapeMismatchError(f"Label index {label} out of range [0, {len(names)})")
        return int(label)
    if str(label) in names:
        return list(names).index(str(label))
    raise ShapeMismatchError(f"Unknown label '{label}'", field=str(label))


@dataclass(frozen=True, eq=False)
class IntersectionIndex:
    """
    Partition of the rows into intersectional groups.

    Groups are ordered lexicographically by the level order of the selected
    attributes; only combinations with at least one member exist.
    """
    attributes: tuple[str, ...]
    groups: tuple[GroupKey, ...]
    members: tuple[NDArray[np.intp], ...]
    min_support: int
    n_rows: int

    def __post_init__(self) -> None:
        if len(self.groups) != len(self.members):
            raise DataValidationError("Every group needs a membership list")
        object.__setattr__(
            self, "members", tuple(frozen_array(m, dtype=np.intp) for m in self.members)
        )

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @cached_property
    def sizes(self) -> NDArray[np.int64]:
        return np.array([len(m) for m in self.members], dtype=np.int64)

    @cached_property
    def flagged(self) -> NDArray[np.bool_]:
        """Groups smaller than ``min_support``; kept, but flagged for reporting."""
        return self.sizes < self.min_support

    @cached_property
    def row_groups(self) -> NDArray[np.intp]:
        """Group index of every row."""
        codes = np.full(self.n_rows, -1, dtype=np.intp)
        for g, rows in enumerate(self.members):
            codes[rows] = g
        codes.flags.writeable = False
        return codes

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.groups)

    def index_of(self, key: GroupKey | str) -> int:
        if isinstance(key, str):
            names = self.group_names
            if key in names:
                return names.index(key)
        elif tuple(key) in self.groups:
            return self.groups.index(tuple(key))
        raise DataValidationError(f"Unknown group {key!r}", field=str(key))

    def largest_group(self) -> int:
        return int(np.argmax(self.sizes))


@dataclass(frozen=True, eq=False)
class LinearFit:
    """
    A fitted linear model: coefficients, intercept and diagnostics.

    ``vcov`` (OLS only) is over the intercept-augmented design, intercept first.
    ``trace`` holds the objective after each iteration or sweep.
    """
    coefficients: NDArray[np.float64]
    intercept: float
    kind: FitKind
    iterations: int
    converged: bool
    regularization: float = 0.0
    optimality: float = 0.0
    residual_variance: float | None = None
    vcov: NDArray[np.float64] | None = None
    trace: tuple[float, ...] = field(default_factory=tuple)
    column_names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", frozen_array(self.coefficients))
        object.__setattr__(self, "intercept", float(self.intercept))
        if self.vcov is not None:
            object.__setattr__(self, "vcov", frozen_array(self.vcov))
        if not self.column_names:
            names = tuple(f"x{j}" for j in range(len(self.coefficients)))
            object.__setattr__(self, "column_names", names)

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])

    def decision_function(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Linear score ``X @ coefficients + intercept``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatchError(
                f"Expected {self.n_features} input columns, got shape {X.shape}"
            )
        return X @ self.coefficients + self.intercept

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "coefficients": self.coefficients,
            "intercept": self.intercept,
            "column_names": list(self.column_names),
            "iterations": self.iterations,
            "converged": self.converged,
            "regularization": self.regularization,
            "optimality": self.optimality,
            "residual_variance": self.residual_variance,
            "vcov": self.vcov,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LinearFit":
        vcov = data.get("vcov")
        return cls(
            coefficients=np.asarray(data["coefficients"], dtype=float),
            intercept=float(data["intercept"]),
            kind=FitKind(data["kind"]),
            iterations=int(data.get("iterations", 0)),
            converged=bool(data.get("converged", False)),
            regularization=float(data.get("regularization", 0.0)),
            optimality=float(data.get("optimality") or 0.0),
            residual_variance=data.get("residual_variance"),
            vcov=None if vcov is None else np.asarray(vcov, dtype=float),
            column_names=tuple(data.get("column_names", ())),
        )


@dataclass(frozen=True, eq=False)
class ConfusionCounts:
    """tp/fp/tn/fn per (label, group); each array is K x L."""
    tp: NDArray[np.int64]
    fp: NDArray[np.int64]
    tn: NDArray[np.int64]
    fn: NDArray[np.int64]
    label_names: tuple[str, ...]
    group_keys: tuple[GroupKey, ...]
    flagged: NDArray[np.bool_]

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            object.__setattr__(self, name, frozen_array(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "flagged", frozen_array(self.flagged, dtype=bool))

    @property
    def sizes(self) -> NDArray[np.int64]:
        return self.tp + self.fp + self.tn + self.fn

    def pooled(self) -> "ConfusionCounts":
        """Whole-population counts as a single group."""
        return ConfusionCounts(
            tp=self.tp.sum(axis=1, keepdims=True),
            fp=self.fp.sum(axis=1, keepdims=True),
            tn=self.tn.sum(axis=1, keepdims=True),
            fn=self.fn.sum(axis=1, keepdims=True),
            label_names=self.label_names,
            group_keys=(("all",),),
            flagged=np.zeros(1, dtype=bool),
        )


@dataclass(frozen=True, eq=False)
class MetricTable:
    """
    Values of one metric per (label, group); arrays are K x L.

    Undefined cells hold NaN and a ZERO_DENOMINATOR status. Cells of groups
    below min_support keep their value with status BELOW_MIN_SUPPORT.
    """
    metric_id: MetricId
    values: NDArray[np.float64]
    status: NDArray[np.object_]
    label_names: tuple[str, ...]
    group_keys: tuple[GroupKey, ...]
    flagged: NDArray[np.bool_]

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        if values.shape != (len(self.label_names), len(self.group_keys)):
            raise ShapeMismatchError(
                f"MetricTable values have shape {values.shape}, expected "
                f"({len(self.label_names)}, {len(self.group_keys)})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "status", frozen_array(self.status, dtype=object))
        object.__setattr__(self, "flagged", frozen_array(self.flagged, dtype=bool))

    @property
    def defined(self) -> NDArray[np.bool_]:
        return ~np.isnan(self.values)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.group_keys)

    def label_index(self, label: int | str) -> int:
        return resolve_label(label, self.label_names)

    def value(self, label: int | str, group: int) -> float | None:
        v = self.values[self.label_index(label), group]
        return None if np.isnan(v) else float(v)

    def usable(self, label: int | str, include_flagged: bool = False) -> NDArray[np.bool_]:
        """Groups whose cell for ``label`` is defined and, by default, not flagged."""
        row = self.defined[self.label_index(label)]
        return row if include_flagged else row & ~self.flagged

    def to_frame(self) -> pd.DataFrame:
        """Long form: metric, label, group, value, status."""
        rows = []
        for k, label in enumerate(self.label_names):
            for g, name in enumerate(self.group_names):
                value = self.values[k, g]
                rows.append({
                    "metric": self.metric_id.value,
                    "label": label,
                    "group": name,
                    "value": None if np.isnan(value) else float(value),
                    "status": self.status[k, g].value,
                })
        return pd.DataFrame(rows, columns=["metric", "label", "group", "value", "status"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "labels": list(self.label_names),
            "groups": list(self.group_names),
            "flagged": self.flagged,
            "values": self.values,
            "status": [[s.value for s in row] for row in self.status],
        }


@dataclass(frozen=True, eq=False)
class FairnessTensor:
    """
    L x K x K array of per-group metric differences between label pairs.

    ``values[l, k1, k2] = g[l, k1] - g[l, k2]``. NaN marks cells built from
    undefined metric values (masked mode). Weighted tensors set ``weighted``.
    """
    values: NDArray[np.float64]
    metric_id: MetricId
    group_keys: tuple[GroupKey, ...]
    label_names: tuple[str, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)
    weighted: bool = False

    def __post_init__(self) -> None:
        values = frozen_array(self.values)
        L, K = len(self.group_keys), len(self.label_names)
        if values.shape != (L, K, K):
            raise ShapeMismatchError(f"Tensor shape {values.shape}, expected ({L}, {K}, {K})")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]), int(self.values.shape[2]))

    @property
    def defined(self) -> NDArray[np.bool_]:
        return ~np.isnan(self.values)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(group_name(g) for g in self.group_keys)

    def to_frame(self) -> pd.DataFrame:
        """Flat form: l, k1, k2, value."""
        L, K, _ = self.shape
        l_idx, k1_idx, k2_idx = np.meshgrid(np.arange(L), np.arange(K), np.arange(K), indexing="ij")
        flat = self.values.reshape(-1)
        return pd.DataFrame({
            "l": [self.group_names[i] for i in l_idx.reshape(-1)],
            "k1": [self.label_names[i] for i in k1_idx.reshape(-1)],
            "k2": [self.label_names[i] for i in k2_idx.reshape(-1)],
            "value": [None if np.isnan(v) else float(v) for v in flat],
        })

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric_id.value,
            "axes": {
                "l": list(self.group_names),
                "k1": list(self.label_names),
                "k2": list(self.label_names),
            },
            "weighted": self.weighted,
            "provenance": dict(self.provenance),
            "values": self.values,
        }


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Non-negative L x K stakeholder weights for the fairness tensor."""
    weights: NDArray[np.float64]
    normalized: bool = False

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 2:
            raise ShapeMismatchError(f"Weight matrix must be 2-D, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise DataValidationError("Weights must be finite and non-negative", field="weights")
        if self.normalized and not np.allclose(weights.sum(axis=1), 1.0, atol=1e-9):
            raise DataValidationError("Normalized weight rows must sum to 1", field="weights")
        object.__setattr__(self, "weights", frozen_array(weights))

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.weights.shape[0]), int(self.weights.shape[1]))

    def normalize(self) -> "WeightMatrix":
        """Rows rescaled to sum to 1; all-zero rows become uniform."""
        sums = self.weights.sum(axis=1, keepdims=True)
        K = self.weights.shape[1]
        rows = np.where(sums > 0, self.weights / np.where(sums > 0, sums, 1.0), 1.0 / K)
        return WeightMatrix(rows, normalized=True)
