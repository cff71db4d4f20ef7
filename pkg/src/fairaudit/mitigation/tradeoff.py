"""Fairness/accuracy trade-off sweeps over the constraint tolerance."""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import AuditError, ConfigError, DataValidationError, LearnerError
from fairaudit.core.models import Dataset, IntersectionIndex
from fairaudit.core.parallel import run_ordered
from fairaudit.core.rng import derive_seed
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.dataset.splitting import split
from fairaudit.learners.logistic import LogisticConfig, fit_logistic, predict_proba
from fairaudit.mitigation.moments import demographic_parity, make_moment
from fairaudit.mitigation.reduction import EGConfig, evaluate_randomized, exponentiated_gradient
from fairaudit.mitigation.thresholds import (
    DEFAULT_THRESHOLD,
    Criterion,
    apply_thresholds,
    fit_thresholds,
)


logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["knob", "accuracy", "violation", "dominated"]


@dataclass(frozen=True)
class TradeoffPoint:
    """One constrained run; accuracy and violation are held-out unless prefixed ``train_``."""
    knob: float
    accuracy: float
    violation: float
    train_accuracy: float
    train_violation: float
    baseline_accuracy: float       # unconstrained fit on the same split
    baseline_violation: float
    seed: int
    converged: bool
    n_components: int
    group_rates: Mapping[str, float] = field(default_factory=dict)
    dominated: bool = False

    def __post_init__(self) -> None:
        if self.violation < 0 or self.train_violation < 0:
            raise DataValidationError("Constraint violation must be >= 0", field="violation")

    @property
    def accuracy_delta(self) -> float:
        return self.accuracy - self.baseline_accuracy

    def to_dict(self) -> dict[str, Any]:
        return {
            "knob": self.knob,
            "held_out": {"accuracy": self.accuracy, "violation": self.violation},
            "train": {"accuracy": self.train_accuracy, "violation": self.train_violation},
            "baseline": {
                "accuracy": self.baseline_accuracy,
                "violation": self.baseline_violation,
            },
            "accuracy_delta": self.accuracy_delta,
            "seed": self.seed,
            "converged": self.converged,
            "n_components": self.n_components,
            "group_rates": dict(self.group_rates),
            "dominated": self.dominated,
        }


def mark_dominated(points: Sequence[TradeoffPoint]) -> list[TradeoffPoint]:
    """Flag points strictly worse than another on both accuracy and violation."""
    return [
        replace(p, dominated=any(
            q.accuracy > p.accuracy and q.violation < p.violation for q in points
        ))
        for p in points
    ]


def _sweep_point(
    ds: Dataset,
    label: int | str,
    attrs: Sequence[str],
    epsilon: float,
    cfg: EGConfig,
    seed: int,
    holdout_fraction: float,
) -> TradeoffPoint:
    train, test = split(ds, holdout_fraction, seed)
    k = ds.label_index(label)
    clf = exponentiated_gradient(train, k, attrs, replace(cfg, epsilon=epsilon))

    results = {}
    for part_name, part in (("train", train), ("test", test)):
        groups = derive_intersections(part, attrs, cfg.min_support).row_groups
        y = part.targets[:, k]
        results[part_name] = evaluate_randomized(clf, part.features, y, groups)

    test_idx = derive_intersections(test, attrs, cfg.min_support)
    baseline_fit = fit_logistic(train.features, train.targets[:, k], cfg.learner)
    baseline = (predict_proba(baseline_fit, test.features) >= 0.5).astype(float)
    y_test = test.targets[:, k]
    moment = make_moment(cfg.constraint, test_idx.row_groups, y_test, 0.0)
    expected = clf.expected_predictions(test.features)

    return TradeoffPoint(
        knob=epsilon,
        accuracy=results["test"][0],
        violation=results["test"][1],
        train_accuracy=results["train"][0],
        train_violation=results["train"][1],
        baseline_accuracy=float(np.mean(baseline == y_test)),
        baseline_violation=moment.violation(baseline),
        seed=seed,
        converged=clf.converged,
        n_components=clf.n_components,
        group_rates={
            name: float(expected[rows].mean())
            for name, rows in zip(test_idx.group_names, test_idx.members, strict=True)
        },
    )


def pareto_sweep(
    ds: Dataset,
    label: int | str,
    attrs: Sequence[str],
    epsilons: Sequence[float],
    cfg: EGConfig | None = None,
    seed: int = 0,
    holdout_fraction: float = 0.3,
    n_jobs: int = 1,
) -> list[TradeoffPoint]:
    """
    One exponentiated-gradient run per epsilon, sorted by epsilon.

    Point i splits and fits with the seed of stream i, so repeated epsilons
    give distinct runs.
    """
    cfg = cfg or EGConfig()
    if not epsilons:
        raise ConfigError("The epsilon grid is empty", field="epsilon")
    for eps in epsilons:
        if not 0.0 < eps <= 1.0:
            raise ConfigError(f"epsilon values must be in (0, 1], got {eps}", field="epsilon")

    def run(i: int) -> TradeoffPoint:
        eps = float(epsilons[i])
        try:
            return _sweep_point(
                ds, label, attrs, eps, cfg, derive_seed(seed, i), holdout_fraction
            )
        except AuditError as e:
            raise LearnerError(
                f"Sweep point epsilon={eps}: {e.message}", field=f"epsilon={eps}"
            ) from e

    points = run_ordered(run, range(len(epsilons)), n_jobs)
    order = sorted(range(len(points)), key=lambda i: (points[i].knob, i))
    marked = mark_dominated([points[i] for i in order])
    logger.info(
        f"Pareto sweep: {len(marked)} points, {sum(p.dominated for p in marked)} dominated"
    )
    return marked


def feasible_envelope(points: Sequence[TradeoffPoint]) -> list[tuple[float, float]]:
    """
    (epsilon, min violation) per distinct epsilon, tightest first.

    The minimum at an epsilon runs over every point at that epsilon or
    looser, so the envelope never increases as epsilon tightens.
    """
    knobs = sorted({p.knob for p in points}, reverse=True)
    envelope: list[tuple[float, float]] = []
    best = np.inf
    for knob in knobs:
        best = min(best, min(p.violation for p in points if p.knob == knob))
        envelope.append((knob, float(best)))
    return envelope[::-1]


def sweep_frame(points: Sequence[TradeoffPoint]) -> pd.DataFrame:
    return pd.DataFrame(
        [[p.knob, p.accuracy, p.violation, p.dominated] for p in points], columns=SWEEP_COLUMNS
    )


def write_sweep_csv(points: Sequence[TradeoffPoint], path: str | Path) -> None:
    sweep_frame(points).to_csv(path, index=False)


def _criterion_violation(
    decisions: NDArray[np.float64],
    y: NDArray[np.float64],
    groups: NDArray[np.intp],
    criterion: Criterion,
) -> float:
    """Largest gap between a group's criterion rate and the pooled rate."""
    rows = y == 1.0 if criterion is Criterion.EQUAL_TPR else np.ones(len(y), dtype=bool)
    if len(np.unique(groups[rows])) < 2:
        return 0.0
    return demographic_parity(groups[rows], 0.0).violation(decisions[rows])


def threshold_sweep(
    ds: Dataset,
    label: int | str,
    attrs: Sequence[str],
    tolerances: Sequence[float],
    criterion: Criterion | str = Criterion.EQUAL_SELECTION_RATE,
    learner_cfg: LogisticConfig | None = None,
    seed: int = 0,
    holdout_fraction: float = 0.3,
    n_jobs: int = 1,
) -> list[TradeoffPoint]:
    """
    Group-threshold post-processing at every tolerance, sorted by tolerance.

    All points share one split and one unconstrained fit; only the policy
    changes. Violation is the largest gap between a group's criterion rate
    and the pooled rate, as for the reduction sweep.
    """
    criterion = Criterion(criterion)
    if not tolerances:
        raise ConfigError("The tolerance grid is empty", field="tolerance")
    for tol in tolerances:
        if not 0.0 <= tol <= 1.0:
            raise ConfigError(f"tolerances must be in [0, 1], got {tol}", field="tolerance")

    train, test = split(ds, holdout_fraction, seed)
    k = ds.label_index(label)
    fit = fit_logistic(train.features, train.targets[:, k], learner_cfg)
    parts = {}
    for part_name, part in (("train", train), ("test", test)):
        idx = derive_intersections(part, attrs, min_support=0)
        parts[part_name] = (
            idx, predict_proba(fit, part.features)[:, None], part.targets[:, k]
        )

    def scores(part_name: str, decisions: NDArray[np.float64]) -> tuple[float, float]:
        idx, _, y = parts[part_name]
        return (
            float(np.mean(decisions == y)),
            _criterion_violation(decisions, y, idx.row_groups, criterion),
        )

    test_idx, test_p, y_test = parts["test"]
    baseline = scores("test", (test_p[:, 0] >= DEFAULT_THRESHOLD).astype(float))

    def run(tol: float) -> TradeoffPoint:
        train_idx, train_p, y_train = parts["train"]
        policy = fit_thresholds(
            train_p, y_train[:, None], train_idx, criterion, tol, [ds.label_names[k]]
        )
        train_decisions = apply_thresholds(train_p, train_idx, policy)[:, 0]
        test_decisions = apply_thresholds(test_p, test_idx, policy)[:, 0]
        train_scores = scores("train", train_decisions)
        test_scores = scores("test", test_decisions)
        rate_rows = y_test == 1.0 if criterion is Criterion.EQUAL_TPR else None
        return TradeoffPoint(
            knob=float(tol),
            accuracy=test_scores[0],
            violation=test_scores[1],
            train_accuracy=train_scores[0],
            train_violation=train_scores[1],
            baseline_accuracy=baseline[0],
            baseline_violation=baseline[1],
            seed=seed,
            converged=bool(policy.achieved[0]),
            n_components=1,
            group_rates=_group_rates(test_decisions, test_idx, rate_rows),
        )

    points = run_ordered(run, [float(t) for t in tolerances], n_jobs)
    order = sorted(range(len(points)), key=lambda i: (points[i].knob, i))
    return mark_dominated([points[i] for i in order])


def _group_rates(
    decisions: NDArray[np.float64],
    idx: IntersectionIndex,
    rows: NDArray[np.bool_] | None = None,
) -> dict[str, float]:
    rates = {}
    for name, members in zip(idx.group_names, idx.members, strict=True):
        if rows is not None:
            members = members[rows[members]]
        if len(members):
            rates[name] = float(decisions[members].mean())
    return rates
