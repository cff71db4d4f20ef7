"""
One-vs-rest multi-label models.

Each label gets an independent linear fit on the same design. When protected
attributes are included ("awareness"), they enter as one-hot columns with the
first observed level of each attribute, in level order, dropped as reference.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import AuditError, ConfigError, LearnerError, ShapeMismatchError
from fairaudit.core.models import Dataset, LinearFit, TaskKind
from fairaudit.core.parallel import run_ordered
from fairaudit.core.serialization import dump_json, load_json
from fairaudit.learners.lasso import LassoConfig, fit_multitask_lasso
from fairaudit.learners.logistic import LogisticConfig, fit_logistic, predict_proba


logger = logging.getLogger(__name__)

MODEL_VERSION = "1.0"


@dataclass(frozen=True)
class ProtectedEncoding:
    """Reference-coded one-hot encoding of protected attributes."""
    attributes: tuple[str, ...]
    reference: tuple[str, ...]              # dropped level per attribute
    levels: tuple[tuple[str, ...], ...]     # encoded levels per attribute

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(
            f"{attr}={level}"
            for attr, levels in zip(self.attributes, self.levels, strict=True)
            for level in levels
        )

    @property
    def blocks(self) -> tuple[str, ...]:
        """Attribute each encoded column comes from."""
        return tuple(
            attr
            for attr, levels in zip(self.attributes, self.levels, strict=True)
            for _ in levels
        )

    def transform(self, ds: Dataset) -> NDArray[np.float64]:
        """Indicator matrix; levels unseen at fit time encode as the reference."""
        parts = []
        for attr, levels in zip(self.attributes, self.levels, strict=True):
            values = ds.protected_values(attr)
            parts.append(np.column_stack([values == level for level in levels])
                         if levels else np.zeros((ds.n_rows, 0)))
        return np.hstack(parts).astype(float) if parts else np.zeros((ds.n_rows, 0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "attributes": list(self.attributes),
            "reference": list(self.reference),
            "levels": [list(levels) for levels in self.levels],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProtectedEncoding":
        return cls(
            attributes=tuple(data["attributes"]),
            reference=tuple(data["reference"]),
            levels=tuple(tuple(levels) for levels in data["levels"]),
        )


def fit_encoding(ds: Dataset, attrs: Sequence[str] | None = None) -> ProtectedEncoding:
    attrs = tuple(attrs) if attrs is not None else ds.protected_names
    reference = []
    levels = []
    for attr in attrs:
        observed = ds.observed_levels(attr)
        reference.append(observed[0])
        levels.append(tuple(observed[1:]))
    return ProtectedEncoding(attributes=attrs, reference=tuple(reference), levels=tuple(levels))


def encode_protected(
    ds: Dataset,
    attrs: Sequence[str] | None = None,
) -> tuple[NDArray[np.float64], ProtectedEncoding]:
    """One-hot demographics matrix and the encoding that produced it."""
    encoding = fit_encoding(ds, attrs)
    return encoding.transform(ds), encoding


@dataclass(frozen=True, eq=False)
class MultiLabelModel:
    """K per-label linear fits over a shared design."""
    fits: tuple[LinearFit, ...]
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    include_protected: bool
    task_kind: TaskKind
    encoding: ProtectedEncoding | None = None

    def __post_init__(self) -> None:
        if len(self.fits) != len(self.label_names):
            raise ShapeMismatchError(
                f"{len(self.fits)} fits for {len(self.label_names)} labels"
            )
        widths = {fit.n_features for fit in self.fits}
        expected = len(self.feature_names) + (len(self.encoding.columns) if self.encoding else 0)
        if widths != {expected}:
            raise ShapeMismatchError(
                f"Fits must share input dimensionality {expected}, got {sorted(widths)}"
            )
        if self.include_protected != (self.encoding is not None):
            raise ConfigError("Awareness flag and protected encoding disagree")

    @property
    def column_names(self) -> tuple[str, ...]:
        extra = self.encoding.columns if self.encoding is not None else ()
        return self.feature_names + extra

    def design(self, ds: Dataset) -> NDArray[np.float64]:
        if ds.feature_names != self.feature_names:
            raise ShapeMismatchError("Dataset features differ from the model's features")
        if self.encoding is None:
            return np.asarray(ds.features)
        return np.hstack([ds.features, self.encoding.transform(ds)])

    def decision_function(self, ds: Dataset) -> NDArray[np.float64]:
        X = self.design(ds)
        return np.column_stack([fit.decision_function(X) for fit in self.fits])

    def predict_proba(self, ds: Dataset) -> NDArray[np.float64]:
        X = self.design(ds)
        return np.column_stack([predict_proba(fit, X) for fit in self.fits])

    def predict(self, ds: Dataset, threshold: float = 0.5) -> NDArray[np.float64]:
        """Binary decisions, 1 where probability >= threshold."""
        return (self.predict_proba(ds) >= threshold).astype(float)

    def predict_values(self, ds: Dataset) -> NDArray[np.float64]:
        """Regression predictions."""
        return self.decision_function(ds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_version": MODEL_VERSION,
            "task_kind": self.task_kind.value,
            "include_protected": self.include_protected,
            "feature_names": list(self.feature_names),
            "label_names": list(self.label_names),
            "encoding": self.encoding.to_dict() if self.encoding is not None else None,
            "fits": [fit.to_dict() for fit in self.fits],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MultiLabelModel":
        version = data.get("model_version")
        if version != MODEL_VERSION:
            raise ConfigError(f"Unsupported model_version '{version}'", field="model_version")
        encoding = data.get("encoding")
        return cls(
            fits=tuple(LinearFit.from_dict(f) for f in data["fits"]),
            feature_names=tuple(data["feature_names"]),
            label_names=tuple(data["label_names"]),
            include_protected=bool(data["include_protected"]),
            task_kind=TaskKind(data["task_kind"]),
            encoding=ProtectedEncoding.from_dict(encoding) if encoding is not None else None,
        )

    def save(self, path: str | Path) -> None:
        dump_json(self, path)

    @classmethod
    def load(cls, path: str | Path) -> "MultiLabelModel":
        return cls.from_dict(load_json(path))


def _design(
    ds: Dataset,
    include_protected: bool,
) -> tuple[NDArray[np.float64], ProtectedEncoding | None]:
    if not include_protected:
        return np.asarray(ds.features), None
    D, encoding = encode_protected(ds)
    return np.hstack([ds.features, D]), encoding


def fit_multilabel(
    ds: Dataset,
    learner_cfg: LogisticConfig | None = None,
    include_protected: bool = False,
    n_jobs: int = 1,
) -> MultiLabelModel:
    """
    One-vs-rest logistic fits, one per label.

    A failure on one label is re-raised as LearnerError carrying the label index.
    """
    if not ds.task_kind.is_classification:
        raise LearnerError("fit_multilabel needs a classification dataset")
    cfg = learner_cfg or LogisticConfig()
    X, encoding = _design(ds, include_protected)
    columns = ds.feature_names + (encoding.columns if encoding is not None else ())

    def fit_label(k: int) -> LinearFit:
        try:
            return fit_logistic(X, ds.targets[:, k], cfg, column_names=columns)
        except AuditError as e:
            raise LearnerError(
                f"Label {k} ({ds.label_names[k]}): {e.message}",
                field=ds.label_names[k],
                label=k,
            ) from e

    fits = run_ordered(fit_label, range(ds.n_labels), n_jobs)
    n_unconverged = sum(not f.converged for f in fits)
    logger.info(
        f"Fitted {len(fits)} logistic labels (aware={include_protected}, "
        f"{n_unconverged} not converged)"
    )
    return MultiLabelModel(
        fits=tuple(fits),
        feature_names=ds.feature_names,
        label_names=ds.label_names,
        include_protected=include_protected,
        task_kind=ds.task_kind,
        encoding=encoding,
    )


def fit_multitask_regression(
    ds: Dataset,
    lam: float,
    cfg: LassoConfig | None = None,
    include_protected: bool = False,
) -> MultiLabelModel:
    """Spending baseline: multi-task lasso across all labels with a shared support."""
    if ds.task_kind.is_classification:
        raise LearnerError("fit_multitask_regression needs a regression dataset")
    X, encoding = _design(ds, include_protected)
    columns = ds.feature_names + (encoding.columns if encoding is not None else ())
    fits = fit_multitask_lasso(X, ds.targets, lam, cfg, column_names=columns)
    return MultiLabelModel(
        fits=tuple(fits),
        feature_names=ds.feature_names,
        label_names=ds.label_names,
        include_protected=include_protected,
        task_kind=ds.task_kind,
        encoding=encoding,
    )
