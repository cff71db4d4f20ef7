"""
Exponentiated-gradient reduction for fair binary classification.

Fair classification is played as a zero-sum game between a learner, which
picks classifiers h, and an auditor, which picks non-negative constraint
multipliers lambda with ||lambda||_1 <= B:

    L(h, lambda) = err(h) + lambda . gamma(h)

The auditor runs multiplicative-weights updates on lambda; each round the
learner best-responds with a cost-sensitive fit, reduced to a weighted
logistic fit on the sign of the per-row cost. The output is a randomized
classifier: a probability vector over the per-round classifiers.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog
from scipy.special import softmax

from fairaudit.core.errors import ConfigError, DataValidationError, LearnerError
from fairaudit.core.interfaces import BinaryLearner, Moment
from fairaudit.core.models import Dataset, LinearFit, frozen_array
from fairaudit.core.parallel import run_ordered
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.learners.logistic import LogisticConfig, LogisticLearner
from fairaudit.mitigation.moments import ConstraintKind, make_moment


logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.02
DEFAULT_MAX_ITER = 50
WEIGHT_TOLERANCE = 1e-9
# Components below this mixture weight are dropped.
PRUNE_WEIGHT = 1e-12
FEASIBILITY_TOLERANCE = 1e-12


class MixtureKind(Enum):
    UNIFORM = "uniform"              # uniform over all iterates
    BEST_ITERATE = "best_iterate"    # uniform prefix with the smallest Lagrangian gap
    LINPROG = "linprog"              # error-minimizing feasible mixture over the iterates


@dataclass(frozen=True)
class EGConfig:
    constraint: ConstraintKind = ConstraintKind.DEMOGRAPHIC_PARITY
    epsilon: float = DEFAULT_EPSILON
    max_iter: int = DEFAULT_MAX_ITER
    learning_rate: float | None = None     # 2 ln(M) / sqrt(max_iter) when unset
    nu: float | None = None                # 1 / sqrt(n) when unset
    mixture: MixtureKind = MixtureKind.UNIFORM
    learner: LogisticConfig = field(default_factory=LogisticConfig)
    min_support: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "constraint", ConstraintKind(self.constraint))
        object.__setattr__(self, "mixture", MixtureKind(self.mixture))
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}", field="epsilon")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}", field="max_iter")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError(
                f"learning_rate must be > 0, got {self.learning_rate}", field="learning_rate"
            )
        if self.nu is not None and self.nu <= 0:
            raise ConfigError(f"nu must be > 0, got {self.nu}", field="nu")

    @property
    def bound(self) -> float:
        """Multiplier budget B = 1 / epsilon."""
        return 1.0 / self.epsilon

    def step_size(self, n_constraints: int) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 2.0 * math.log(n_constraints) / math.sqrt(self.max_iter)

    def to_dict(self) -> dict[str, Any]:
        return {
            "constraint": self.constraint.value,
            "epsilon": self.epsilon,
            "max_iter": self.max_iter,
            "learning_rate": self.learning_rate,
            "nu": self.nu,
            "mixture": self.mixture.value,
            "learner": self.learner.to_dict(),
            "min_support": self.min_support,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EGConfig":
        known = {
            "constraint", "epsilon", "max_iter", "learning_rate", "nu", "mixture", "learner",
            "min_support",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown EG config keys: {unknown}", field=unknown[0])
        values = dict(data)
        if "learner" in values:
            values["learner"] = LogisticConfig.from_dict(values["learner"])
        for key, enum in (("constraint", ConstraintKind), ("mixture", MixtureKind)):
            if key in values:
                try:
                    values[key] = enum(values[key])
                except ValueError:
                    raise ConfigError(f"Unknown {key} '{values[key]}'", field=key) from None
        return cls(**values)


@dataclass(frozen=True)
class EGIteration:
    iteration: int
    gap: float             # Lagrangian duality gap of the running uniform mixture
    violation: float       # constraint violation of the running uniform mixture
    error: float           # training error of the running uniform mixture
    multiplier_sum: float  # ||lambda||_1 played this round


@dataclass(frozen=True, eq=False)
class RandomizedClassifier:
    """Mixture of deterministic classifiers h_t(x) = 1{p_t(x) >= 0.5}."""
    fits: tuple[LinearFit, ...]
    weights: NDArray[np.float64]
    constraint: ConstraintKind
    epsilon: float
    label: str
    feature_names: tuple[str, ...]
    trace: tuple[EGIteration, ...]
    converged: bool
    mixture: MixtureKind = MixtureKind.UNIFORM
    # Training constraint values of the final mixture are all within epsilon.
    feasible: bool = False
    learner: BinaryLearner = field(default_factory=LogisticLearner)

    def __post_init__(self) -> None:
        weights = frozen_array(self.weights)
        if weights.shape != (len(self.fits),):
            raise DataValidationError(
                f"{len(weights)} mixture weights for {len(self.fits)} components", field="weights"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise DataValidationError(
                "Mixture weights must be non-negative and sum to 1", field="weights"
            )
        object.__setattr__(self, "weights", weights)

    @property
    def n_components(self) -> int:
        return len(self.fits)

    @property
    def final_gap(self) -> float:
        return self.trace[-1].gap if self.trace else 0.0

    def component_predictions(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """n x T hard decisions of every component."""
        return np.column_stack(
            [self.learner.predict_proba(fit, X) >= 0.5 for fit in self.fits]
        ).astype(float)

    def expected_predictions(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """P(h(x) = 1) under the mixture."""
        return self.component_predictions(X) @ self.weights

    def predict(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Deterministic report decisions: expected prediction thresholded at 0.5."""
        return (self.expected_predictions(X) >= 0.5).astype(float)

    def sample(self, X: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.float64]:
        """One randomized draw per row."""
        return (rng.random(X.shape[0]) < self.expected_predictions(X)).astype(float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "constraint": self.constraint.value,
            "epsilon": self.epsilon,
            "mixture": self.mixture.value,
            "learner": self.learner.name,
            "converged": self.converged,
            "feasible": self.feasible,
            "final_gap": self.final_gap,
            "weights": self.weights,
            "components": [fit.to_dict() for fit in self.fits],
            "trace": [
                {
                    "iteration": it.iteration,
                    "gap": it.gap,
                    "violation": it.violation,
                    "error": it.error,
                    "multiplier_sum": it.multiplier_sum,
                }
                for it in self.trace
            ],
        }


def _error(h: NDArray[np.float64], y: NDArray[np.float64]) -> float:
    """Expected 0-1 error of (possibly fractional) predictions."""
    return float(np.mean(h * (1.0 - y) + (1.0 - h) * y))


class _Lagrangian:
    """Best responses and Lagrangian values for one training set."""

    def __init__(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.float64],
        moment: Moment,
        learner: BinaryLearner,
        feature_names: tuple[str, ...],
    ) -> None:
        self.X = X
        self.y = y
        self.moment = moment
        self.learner = learner
        self.feature_names = feature_names
        self._base_cost = (1.0 - 2.0 * y) / len(y)

    def best_response(
        self,
        multipliers: NDArray[np.float64],
    ) -> tuple[LinearFit, NDArray[np.float64]]:
        """Weighted fit on 1{cost < 0} with weights |cost|, rescaled to mean 1."""
        cost = self._base_cost + self.moment.signed_weights(multipliers)
        labels = (cost < 0).astype(float)
        weights = np.abs(cost)
        total = weights.sum()
        weights = weights * len(weights) / total if total > 0 else np.ones_like(weights)
        fit = self.learner.fit(
            self.X, labels, sample_weight=weights, column_names=self.feature_names
        )
        return fit, (self.learner.predict_proba(fit, self.X) >= 0.5).astype(float)

    def value(self, h: NDArray[np.float64], multipliers: NDArray[np.float64]) -> float:
        return _error(h, self.y) + float(multipliers @ self.moment.gamma(h))


def _mixture_weights(
    kind: MixtureKind,
    errors: NDArray[np.float64],
    gammas: NDArray[np.float64],
    bound: float,
    best_prefix: int,
) -> NDArray[np.float64]:
    T = len(errors)
    if kind is MixtureKind.BEST_ITERATE:
        weights = np.zeros(T)
        weights[:best_prefix] = 1.0 / best_prefix
        return weights
    if kind is MixtureKind.LINPROG:
        # Variables [w_1..w_T, v]: min err.w + B v  s.t.  gamma.w - v <= 0, sum w = 1.
        c = np.concatenate([errors, [bound]])
        A_ub = np.hstack([gammas.T, -np.ones((gammas.shape[1], 1))])
        A_eq = np.concatenate([np.ones(T), [0.0]])[None, :]
        result = linprog(
            c, A_ub=A_ub, b_ub=np.zeros(gammas.shape[1]), A_eq=A_eq, b_eq=[1.0],
            bounds=[(0, None)] * (T + 1), method="highs",
        )
        if result.success:
            weights = np.clip(result.x[:T], 0.0, None)
            return weights / weights.sum()
        logger.warning(f"Mixture linear program failed ({result.message}); using uniform weights")
    return np.full(T, 1.0 / T)


def fit_exponentiated_gradient(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    groups: NDArray[np.intp],
    cfg: EGConfig | None = None,
    label: str = "label",
    feature_names: Sequence[str] | None = None,
    learner: BinaryLearner | None = None,
) -> RandomizedClassifier:
    """
    Run the Lagrangian game on arrays.

    The best-response oracle is ``learner``, a logistic regression with
    ``cfg.learner`` when not given.

    Stops early when the first best response (plain error minimization) is
    already feasible, or when the duality gap of the running mixture drops
    below nu. Running out of iterations is reported with ``converged=False``.
    """
    cfg = cfg or EGConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.isin(y, (0.0, 1.0)).all():
        raise LearnerError("Exponentiated gradient needs binary targets", field=label)
    names = tuple(feature_names) if feature_names is not None else tuple(
        f"x{j}" for j in range(X.shape[1])
    )
    moment = make_moment(cfg.constraint, groups, y, cfg.epsilon)
    learner = learner if learner is not None else LogisticLearner(cfg.learner)
    game = _Lagrangian(X, y, moment, learner, names)
    M = moment.n_constraints
    B = cfg.bound
    eta = cfg.step_size(M)
    nu = cfg.nu if cfg.nu is not None else 1.0 / math.sqrt(len(y))

    theta = np.zeros(M)
    multiplier_total = np.zeros(M)
    fits: list[LinearFit] = []
    decisions: list[NDArray[np.float64]] = []
    gammas: list[NDArray[np.float64]] = []
    errors: list[float] = []
    trace: list[EGIteration] = []
    converged = False
    best_gap, best_prefix = math.inf, 1

    for t in range(1, cfg.max_iter + 1):
        # Slot 0 of the softmax holds the mass left unspent under the budget.
        multipliers = B * softmax(np.concatenate([[0.0], theta]))[1:]
        fit, h = game.best_response(multipliers)
        gamma_t = moment.gamma(h)
        fits.append(fit)
        decisions.append(h)
        gammas.append(gamma_t)
        errors.append(_error(h, y))

        if t == 1 and np.all(gamma_t <= 0):
            trace.append(
                EGIteration(1, 0.0, moment.violation(h), errors[0], float(multipliers.sum()))
            )
            converged = True
            logger.info(f"{label}: unconstrained best response is feasible at eps={cfg.epsilon}")
            break

        multiplier_total += multipliers
        average_multipliers = multiplier_total / t
        Q = np.mean(decisions, axis=0)
        value = game.value(Q, average_multipliers)
        _, h_best = game.best_response(average_multipliers)
        lower = game.value(h_best, average_multipliers)
        upper = _error(Q, y) + B * max(0.0, float(moment.gamma(Q).max()))
        gap = max(value - lower, upper - value, 0.0)
        trace.append(
            EGIteration(t, gap, moment.violation(Q), _error(Q, y), float(multipliers.sum()))
        )
        logger.debug(f"{label}: iteration {t} gap={gap:.5f} violation={trace[-1].violation:.5f}")

        if gap < best_gap:
            best_gap, best_prefix = gap, t
        if gap < nu:
            converged = True
            break
        theta += eta * gamma_t

    weights = _mixture_weights(
        cfg.mixture, np.array(errors), np.array(gammas), B, best_prefix
    )
    keep = weights > PRUNE_WEIGHT
    weights = weights[keep] / weights[keep].sum()
    kept_fits = tuple(f for f, k in zip(fits, keep, strict=True) if k)
    mixed = np.column_stack(decisions)[:, keep] @ weights
    feasible = bool(np.all(moment.gamma(mixed) <= FEASIBILITY_TOLERANCE))

    if not converged:
        # Running out of iterations with a feasible mixture is not a failure.
        report = logger.info if feasible else logger.warning
        report(
            f"{label}: exponentiated gradient stopped after {cfg.max_iter} iterations "
            f"with gap {trace[-1].gap:.5f} (nu={nu:.5f}), mixture feasible={feasible}"
        )
    logger.info(
        f"{label}: {cfg.constraint.value} eps={cfg.epsilon}, {len(fits)} iterations, "
        f"{len(kept_fits)} components, converged={converged}"
    )
    return RandomizedClassifier(
        fits=kept_fits,
        weights=weights,
        constraint=cfg.constraint,
        epsilon=cfg.epsilon,
        label=label,
        feature_names=names,
        trace=tuple(trace),
        converged=converged,
        mixture=cfg.mixture,
        feasible=feasible,
        learner=learner,
    )


def exponentiated_gradient(
    ds: Dataset,
    label: int | str,
    attrs: Sequence[str],
    cfg: EGConfig | None = None,
) -> RandomizedClassifier:
    """
    Constrain one label of a classification dataset over the intersections of
    ``attrs``. The protected columns are never model inputs.
    """
    cfg = cfg or EGConfig()
    if not ds.task_kind.is_classification:
        raise LearnerError("Exponentiated gradient needs a classification dataset")
    if not attrs:
        raise ConfigError("At least one protected attribute is required", field="attrs")
    k = ds.label_index(label)
    idx = derive_intersections(ds, attrs, cfg.min_support)
    return fit_exponentiated_gradient(
        ds.features, ds.targets[:, k], idx.row_groups, cfg,
        label=ds.label_names[k], feature_names=ds.feature_names,
    )


def exponentiated_gradient_multilabel(
    ds: Dataset,
    attrs: Sequence[str],
    cfg: EGConfig | None = None,
    n_jobs: int = 1,
) -> tuple[RandomizedClassifier, ...]:
    """One independent run per label."""
    return tuple(run_ordered(
        lambda k: exponentiated_gradient(ds, k, attrs, cfg), range(ds.n_labels), n_jobs
    ))


def randomized_predictions(
    classifiers: Sequence[RandomizedClassifier],
    X: NDArray[np.float64],
) -> NDArray[np.float64]:
    """n x K expected predictions of per-label mixtures."""
    return np.column_stack([clf.expected_predictions(X) for clf in classifiers])


def evaluate_randomized(
    clf: RandomizedClassifier,
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    groups: NDArray[np.intp],
) -> tuple[float, float]:
    """(expected accuracy, constraint violation) of a mixture on any rows."""
    y = np.asarray(y, dtype=float).reshape(-1)
    h = clf.expected_predictions(X)
    moment = make_moment(clf.constraint, groups, y, 0.0)
    return 1.0 - _error(h, y), moment.violation(h)
