"""
Protocol definitions for pluggable components.

This module defines the structural interfaces (Protocols) that let the
mitigation and statistics code swap base learners and fairness constraints,
and let callers observe the audit pipeline without changing it.
"""

from typing import Protocol, runtime_checkable

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import AuditError
from fairaudit.core.models import AuditStage, LinearFit


@runtime_checkable
class BinaryLearner(Protocol):
    """
    Protocol for binary learners usable as a best-response oracle.

    ``fit`` must accept non-negative per-row weights so that cost-sensitive
    classification can be reduced to weighted classification.
    """

    @property
    def name(self) -> str:
        """Human-readable name of this learner."""
        ...

    def fit(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.float64],
        sample_weight: NDArray[np.float64] | None = None,
        column_names: tuple[str, ...] = (),
    ) -> LinearFit:
        """Fit on binary targets and return the fitted model."""
        ...

    def predict_proba(self, fit: LinearFit, X: NDArray[np.float64]) -> NDArray[np.float64]:
        """Positive-class probabilities for each row of X."""
        ...


@runtime_checkable
class Moment(Protocol):
    """
    Protocol for fairness constraints written as moment inequalities.

    A moment holds one signed multiplier per inequality. ``gamma`` returns the
    constraint values of a (possibly randomized) predictor, already shifted by
    the slack, so a predictor is feasible when every entry is <= 0.
    """

    @property
    def name(self) -> str:
        ...

    @property
    def n_constraints(self) -> int:
        ...

    def gamma(self, predictions: NDArray[np.float64]) -> NDArray[np.float64]:
        """Constraint values for expected predictions in [0, 1]."""
        ...

    def signed_weights(self, multipliers: NDArray[np.float64]) -> NDArray[np.float64]:
        """Per-row coefficient of h(x) in the Lagrangian's constraint term."""
        ...

    def violation(self, predictions: NDArray[np.float64]) -> float:
        """Largest constraint value without slack, clipped at zero."""
        ...


class AuditObserver(Protocol):
    """
    Observer protocol for audit pipeline progress.

    Report writers and tests implement this to follow the orchestrator.
    """

    def on_stage_changed(self, stage: AuditStage) -> None:
        """Called when the pipeline enters a new stage."""
        ...

    def on_error(self, error: AuditError) -> None:
        """Called when a pipeline stage fails."""
        ...
