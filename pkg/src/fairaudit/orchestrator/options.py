"""Audit run options."""

import hashlib
from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from fairaudit.core.errors import ConfigError, DataValidationError
from fairaudit.core.models import (
    REGRESSION_METRICS,
    REPORTED_CLASSIFICATION_METRICS,
    MetricId,
    TaskKind,
)
from fairaudit.core.rng import check_seed
from fairaudit.core.serialization import dumps_json, load_json
from fairaudit.dataset.intersections import DEFAULT_MIN_SUPPORT
from fairaudit.learners.lasso import LassoConfig
from fairaudit.learners.logistic import LogisticConfig
from fairaudit.metrics.calibration import DEFAULT_BINS
from fairaudit.mitigation.reduction import DEFAULT_EPSILON
from fairaudit.mitigation.thresholds import DEFAULT_TOLERANCE, Criterion
from fairaudit.statistics.two_sample import DEFAULT_PERMUTATIONS, StatisticId
from fairaudit.tensor.aggregate import AggregateScheme
from fairaudit.tensor.build import BuildMode


DEFAULT_EPSILON_GRID = (0.02, 0.1, 0.5)


@dataclass(frozen=True)
class AuditOptions:
    seed: int = 0
    metrics: tuple[MetricId, ...] = ()          # empty: the task's reported set
    attrs: tuple[str, ...] = ()                 # empty: every protected attribute
    label: str | None = None                    # proxy/decompose/sweep label, first when unset
    min_support: int = DEFAULT_MIN_SUPPORT
    include_flagged: bool = False
    holdout_fraction: float = 0.3
    fail_threshold: float | None = None
    tensor_metric: MetricId | None = None       # recall for classification, else first metric
    build_mode: BuildMode = BuildMode.MASKED
    schemes: tuple[AggregateScheme, ...] = tuple(AggregateScheme)
    calibration_bins: int = DEFAULT_BINS
    include_protected: bool = False
    learner: LogisticConfig = field(default_factory=LogisticConfig)
    lasso_lambda: float = 0.01
    lasso: LassoConfig = field(default_factory=LassoConfig)
    permutations: int = DEFAULT_PERMUTATIONS
    statistic: StatisticId = StatisticId.ACCURACY
    epsilon: float = DEFAULT_EPSILON
    epsilons: tuple[float, ...] = DEFAULT_EPSILON_GRID
    criterion: Criterion = Criterion.EQUAL_SELECTION_RATE
    tolerance: float = DEFAULT_TOLERANCE
    n_jobs: int = 1

    def __post_init__(self) -> None:
        check_seed(self.seed)
        object.__setattr__(self, "metrics", tuple(_metric(m) for m in self.metrics))
        if self.tensor_metric is not None:
            object.__setattr__(self, "tensor_metric", _metric(self.tensor_metric))
        object.__setattr__(self, "attrs", tuple(self.attrs))
        object.__setattr__(self, "build_mode", BuildMode(self.build_mode))
        object.__setattr__(self, "schemes", tuple(AggregateScheme(s) for s in self.schemes))
        object.__setattr__(self, "statistic", StatisticId(self.statistic))
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(
                f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}",
                field="holdout_fraction",
            )
        if self.fail_threshold is not None and self.fail_threshold < 0:
            raise ConfigError(
                f"fail_threshold must be >= 0, got {self.fail_threshold}", field="fail_threshold"
            )
        if self.min_support < 0:
            raise ConfigError(
                f"min_support must be >= 0, got {self.min_support}", field="min_support"
            )
        if self.permutations < 1:
            raise ConfigError(
                f"permutations must be >= 1, got {self.permutations}", field="permutations"
            )
        for eps in (self.epsilon, *self.epsilons):
            if not 0.0 < eps <= 1.0:
                raise ConfigError(f"epsilon values must be in (0, 1], got {eps}", field="epsilon")
        if not 0.0 <= self.tolerance <= 1.0:
            raise ConfigError(
                f"tolerance must be in [0, 1], got {self.tolerance}", field="tolerance"
            )
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be >= 1, got {self.n_jobs}", field="n_jobs")

    def metric_ids(self, task_kind: TaskKind) -> tuple[MetricId, ...]:
        if self.metrics:
            return self.metrics
        if task_kind.is_classification:
            return REPORTED_CLASSIFICATION_METRICS
        return tuple(m for m in MetricId if m in REGRESSION_METRICS)

    def tensor_metric_id(self, task_kind: TaskKind) -> MetricId:
        if self.tensor_metric is not None:
            return self.tensor_metric
        metrics = self.metric_ids(task_kind)
        if MetricId.RECALL_TPR in metrics:
            return MetricId.RECALL_TPR
        return metrics[0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "metrics": [m.value for m in self.metrics],
            "attrs": list(self.attrs),
            "label": self.label,
            "min_support": self.min_support,
            "include_flagged": self.include_flagged,
            "holdout_fraction": self.holdout_fraction,
            "fail_threshold": self.fail_threshold,
            "tensor_metric": self.tensor_metric.value if self.tensor_metric else None,
            "build_mode": self.build_mode.value,
            "schemes": [s.value for s in self.schemes],
            "calibration_bins": self.calibration_bins,
            "include_protected": self.include_protected,
            "learner": self.learner.to_dict(),
            "lasso_lambda": self.lasso_lambda,
            "lasso": self.lasso.to_dict(),
            "permutations": self.permutations,
            "statistic": self.statistic.value,
            "epsilon": self.epsilon,
            "epsilons": list(self.epsilons),
            "criterion": self.criterion.value,
            "tolerance": self.tolerance,
            "n_jobs": self.n_jobs,
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(dumps_json(self.to_dict()).encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AuditOptions":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown audit option keys: {unknown}", field=unknown[0])
        values = dict(data)
        if "learner" in values:
            values["learner"] = LogisticConfig.from_dict(values["learner"])
        if "lasso" in values:
            values["lasso"] = LassoConfig.from_dict(values["lasso"])
        for key, enum in (
            ("build_mode", BuildMode),
            ("statistic", StatisticId),
            ("criterion", Criterion),
        ):
            if key in values:
                try:
                    values[key] = enum(values[key])
                except ValueError:
                    raise ConfigError(f"Unknown {key} '{values[key]}'", field=key) from None
        if "schemes" in values:
            try:
                values["schemes"] = tuple(AggregateScheme(s) for s in values["schemes"])
            except ValueError:
                raise ConfigError(f"Unknown schemes {values['schemes']}", field="schemes") from None
        for key in ("metrics", "attrs", "epsilons"):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "AuditOptions":
        try:
            data = load_json(path)
        except FileNotFoundError as e:
            raise ConfigError(str(e), field=str(path)) from e
        except ValueError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}", field=str(path)) from e
        if not isinstance(data, Mapping):
            raise ConfigError("Audit config must be a JSON object")
        return cls.from_dict(data)


def _metric(value: MetricId | str) -> MetricId:
    if isinstance(value, MetricId):
        return value
    try:
        return MetricId.parse(value)
    except DataValidationError as e:
        raise ConfigError(e.message, field="metrics") from None
