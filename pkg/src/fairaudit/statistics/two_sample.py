"""
Classifier two-sample tests for proxy discrimination.

A binary protected indicator splits the rows into two samples. A logistic
classifier is trained to tell them apart from the features; if its held-out
performance beats what it achieves on shuffled indicators, the features
carry information about the protected attribute.

Protocol, fixed per seed:
  1. rows are split 70/30 into train/test with stream ``(seed, 0)``;
  2. features are standardized with train-split statistics;
  3. the classifier is fitted on train and scored on test;
  4. permutation b shuffles the indicator over all rows with stream
     ``(seed, 1 + b)``, refits on the same train rows and rescores on the
     same test rows;
  5. p = (1 + #{null >= observed}) / (1 + n_permutations).
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.stats import rankdata
from statsmodels.stats.multitest import multipletests

from fairaudit.core.errors import ConfigError, DataValidationError, ShapeMismatchError
from fairaudit.core.interfaces import BinaryLearner
from fairaudit.core.models import LinearFit, frozen_array
from fairaudit.core.parallel import run_ordered
from fairaudit.core.rng import check_seed, make_rng
from fairaudit.dataset.splitting import split_rows
from fairaudit.learners.logistic import LogisticConfig, LogisticLearner
from fairaudit.statistics.attribution import Attribution, linear_attribution


logger = logging.getLogger(__name__)

SPLIT_STREAM = 0
DEFAULT_PERMUTATIONS = 200


class StatisticId(Enum):
    ACCURACY = "accuracy"
    AUC = "auc"


@dataclass(frozen=True)
class TwoSampleConfig:
    n_permutations: int = DEFAULT_PERMUTATIONS
    holdout_fraction: float = 0.3
    statistic: StatisticId = StatisticId.ACCURACY
    learner: LogisticConfig = field(default_factory=lambda: LogisticConfig(l2=1e-4))
    n_jobs: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "statistic", StatisticId(self.statistic))
        if self.n_permutations < 1:
            raise ConfigError(
                f"n_permutations must be >= 1, got {self.n_permutations}", field="n_permutations"
            )
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(
                f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}",
                field="holdout_fraction",
            )
        if self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be >= 1, got {self.n_jobs}", field="n_jobs")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_permutations": self.n_permutations,
            "holdout_fraction": self.holdout_fraction,
            "statistic": self.statistic.value,
            "learner": self.learner.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TwoSampleConfig":
        known = {"n_permutations", "holdout_fraction", "statistic", "learner", "n_jobs"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown two-sample config keys: {unknown}", field=unknown[0])
        values = dict(data)
        if "learner" in values:
            values["learner"] = LogisticConfig.from_dict(values["learner"])
        if "statistic" in values:
            try:
                values["statistic"] = StatisticId(values["statistic"])
            except ValueError:
                raise ConfigError(
                    f"Unknown statistic '{values['statistic']}'", field="statistic"
                ) from None
        return cls(**values)


@dataclass(frozen=True, eq=False)
class TwoSampleResult:
    statistic_id: StatisticId
    observed_statistic: float
    null_samples: NDArray[np.float64]
    p_value: float
    fit: LinearFit
    attribution: Attribution
    n_permutations: int
    seed: int
    n_train: int
    n_test: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "null_samples", frozen_array(self.null_samples))

    def to_dict(self, max_null_samples: int | None = None) -> dict[str, Any]:
        """JSON form; ``max_null_samples`` truncates the null draws, keeping their count."""
        samples = self.null_samples
        if max_null_samples is not None:
            samples = samples[:max_null_samples]
        return {
            "statistic": self.statistic_id.value,
            "observed_statistic": self.observed_statistic,
            "p_value": self.p_value,
            "n_permutations": self.n_permutations,
            "null_samples": samples,
            "null_samples_truncated": len(samples) < len(self.null_samples),
            "null_mean": float(np.mean(self.null_samples)),
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "classifier": {
                "intercept": self.fit.intercept,
                "coefficients": dict(zip(self.fit.column_names, self.fit.coefficients.tolist(),
                                         strict=True)),
                "converged": self.fit.converged,
                "iterations": self.fit.iterations,
            },
            "attribution": self.attribution,
        }


def auc_score(y: NDArray[np.float64], scores: NDArray[np.float64]) -> float:
    """Area under the ROC curve from average ranks; 0.5 when one class is absent."""
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(scores)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _statistic(
    statistic: StatisticId,
    y: NDArray[np.float64],
    proba: NDArray[np.float64],
) -> float:
    if statistic is StatisticId.AUC:
        return auc_score(y, proba)
    return float(np.mean((proba >= 0.5) == (y == 1)))


def p_value(observed: float, null_samples: NDArray[np.float64]) -> float:
    return float((1 + np.sum(null_samples >= observed)) / (1 + len(null_samples)))


def _standardize(
    X: NDArray[np.float64],
    train: NDArray[np.intp],
) -> NDArray[np.float64]:
    mean = X[train].mean(axis=0)
    scale = X[train].std(axis=0)
    scale[scale == 0] = 1.0
    return (X - mean) / scale


def two_sample_test(
    X: NDArray[np.float64],
    attr: NDArray[Any],
    cfg: TwoSampleConfig | None = None,
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
    learner: BinaryLearner | None = None,
) -> TwoSampleResult:
    """
    Permutation-calibrated classifier two-sample test of ``attr`` against ``X``.

    ``learner`` defaults to logistic regression with ``cfg.learner``; its fits
    must be linear for the attribution to be meaningful.
    """
    cfg = cfg or TwoSampleConfig()
    learner = learner if learner is not None else LogisticLearner(cfg.learner)
    seed = check_seed(seed)
    X = np.asarray(X, dtype=float)
    y = np.asarray(attr).astype(float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ShapeMismatchError(f"X shape {X.shape} does not match {len(y)} indicator rows")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataValidationError("Protected indicator must be binary", field="attr")
    if y.min() == y.max():
        raise DataValidationError("Protected indicator has a single class", field="attr")
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"x{j}" for j in range(X.shape[1])
    )

    train, test = split_rows(len(y), cfg.holdout_fraction, make_rng(seed, SPLIT_STREAM))
    if y[test].min() == y[test].max():
        raise DataValidationError(
            "Held-out split contains a single class; use more rows", field="attr"
        )
    Z = _standardize(X, train)

    def evaluate(labels: NDArray[np.float64]) -> tuple[float, LinearFit]:
        fit = learner.fit(Z[train], labels[train], column_names=names)
        return _statistic(cfg.statistic, labels[test], learner.predict_proba(fit, Z[test])), fit

    observed, fit = evaluate(y)

    def permuted(b: int) -> float:
        return evaluate(make_rng(seed, 1 + b).permutation(y))[0]

    null = np.array(run_ordered(permuted, range(cfg.n_permutations), cfg.n_jobs))
    p = p_value(observed, null)
    logger.info(
        f"Two-sample test: {cfg.statistic.value}={observed:.4f}, "
        f"null mean={null.mean():.4f}, p={p:.4g} ({cfg.n_permutations} permutations)"
    )
    return TwoSampleResult(
        statistic_id=cfg.statistic,
        observed_statistic=observed,
        null_samples=null,
        p_value=p,
        fit=fit,
        attribution=linear_attribution(fit, Z[test]),
        n_permutations=cfg.n_permutations,
        seed=seed,
        n_train=len(train),
        n_test=len(test),
    )


@dataclass(frozen=True, eq=False)
class MulticlassTestResult:
    """One level-vs-rest test per level with Holm-adjusted p-values."""
    attribute: str
    levels: tuple[str, ...]
    results: tuple[TwoSampleResult, ...]
    adjusted_p_values: NDArray[np.float64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "adjusted_p_values", frozen_array(self.adjusted_p_values))

    @property
    def p_values(self) -> NDArray[np.float64]:
        return np.array([r.p_value for r in self.results])

    def significant(self, alpha: float = 0.05) -> tuple[str, ...]:
        return tuple(
            level for level, p in zip(self.levels, self.adjusted_p_values, strict=True)
            if p <= alpha
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "attribute": self.attribute,
            "levels": {
                level: {**result.to_dict(), "p_value_holm": float(adjusted)}
                for level, result, adjusted in zip(
                    self.levels, self.results, self.adjusted_p_values, strict=True
                )
            },
        }


def multiclass_attr_test(
    X: NDArray[np.float64],
    attr: NDArray[Any],
    cfg: TwoSampleConfig | None = None,
    seed: int = 0,
    feature_names: Sequence[str] | None = None,
    levels: Sequence[str] | None = None,
    attribute: str = "attr",
    learner: BinaryLearner | None = None,
) -> MulticlassTestResult:
    """
    Level-vs-rest two-sample tests for a categorical attribute.

    Every level uses the same seed, so all tests share one train/test split.
    """
    values = np.asarray(attr).astype(str).reshape(-1)
    if levels is None:
        levels = tuple(sorted(set(values)))
    levels = tuple(str(v) for v in levels)
    for level in levels:
        if not np.any(values == level):
            raise DataValidationError(f"Level '{level}' has no rows", field=attribute)
    if len(levels) < 2:
        raise DataValidationError(f"Attribute '{attribute}' needs at least 2 levels",
                                  field=attribute)

    results = tuple(
        two_sample_test(X, (values == level).astype(float), cfg, seed, feature_names, learner)
        for level in levels
    )
    _, adjusted, _, _ = multipletests([r.p_value for r in results], method="holm")
    return MulticlassTestResult(
        attribute=attribute,
        levels=levels,
        results=results,
        adjusted_p_values=np.asarray(adjusted, dtype=float),
    )
