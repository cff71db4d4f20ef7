"""Disparity mitigation: group thresholds, exponentiated-gradient reduction, trade-offs."""

from fairaudit.mitigation.thresholds import (
    DEFAULT_THRESHOLD,
    DEFAULT_TOLERANCE,
    Criterion,
    ThresholdPolicy,
    apply_thresholds,
    fit_thresholds,
)
from fairaudit.mitigation.moments import (
    ConditionalMeanParity,
    ConstraintKind,
    demographic_parity,
    equalized_odds,
    make_moment,
)
from fairaudit.mitigation.reduction import (
    EGConfig,
    EGIteration,
    MixtureKind,
    RandomizedClassifier,
    evaluate_randomized,
    exponentiated_gradient,
    exponentiated_gradient_multilabel,
    fit_exponentiated_gradient,
    randomized_predictions,
)
from fairaudit.mitigation.tradeoff import (
    TradeoffPoint,
    feasible_envelope,
    mark_dominated,
    pareto_sweep,
    sweep_frame,
    threshold_sweep,
    write_sweep_csv,
)
from fairaudit.mitigation.awareness import AwarenessComparison, awareness_comparison

__all__ = [
    # Thresholds
    "DEFAULT_THRESHOLD",
    "DEFAULT_TOLERANCE",
    "Criterion",
    "ThresholdPolicy",
    "apply_thresholds",
    "fit_thresholds",
    # Moments
    "ConditionalMeanParity",
    "ConstraintKind",
    "demographic_parity",
    "equalized_odds",
    "make_moment",
    # Exponentiated gradient
    "EGConfig",
    "EGIteration",
    "MixtureKind",
    "RandomizedClassifier",
    "evaluate_randomized",
    "exponentiated_gradient",
    "exponentiated_gradient_multilabel",
    "fit_exponentiated_gradient",
    "randomized_predictions",
    # Trade-offs
    "TradeoffPoint",
    "feasible_envelope",
    "mark_dominated",
    "pareto_sweep",
    "sweep_frame",
    "threshold_sweep",
    "write_sweep_csv",
    # Awareness
    "AwarenessComparison",
    "awareness_comparison",
]
