"""
Fairness constraints as moment inequalities over group-conditional means.

Each constraint compares the mean prediction inside a cell (group within an
event) to the mean over the whole event, once per sign:

    +(E[h | event, group] - E[h | event]) - eps <= 0
    -(E[h | event, group] - E[h | event]) - eps <= 0

Demographic parity has a single event (all rows); equalized odds has one
event per true class.
"""

from enum import Enum

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import DataValidationError, ShapeMismatchError


class ConstraintKind(Enum):
    DEMOGRAPHIC_PARITY = "demographic_parity"
    EQUALIZED_ODDS = "equalized_odds"


class ConditionalMeanParity:
    """
    Moment over (event, group) cells; implements the ``Moment`` protocol.

    Cells without rows carry no constraint.
    """

    def __init__(
        self,
        name: str,
        groups: NDArray[np.intp],
        events: NDArray[np.intp],
        eps: float,
    ) -> None:
        groups = np.asarray(groups, dtype=np.intp).reshape(-1)
        events = np.asarray(events, dtype=np.intp).reshape(-1)
        if groups.shape != events.shape:
            raise ShapeMismatchError(f"{len(groups)} group codes for {len(events)} rows")
        if np.any(groups < 0):
            raise DataValidationError("Every row needs a group", field="groups")
        if len(np.unique(groups)) < 2:
            raise DataValidationError("Constraints need at least 2 groups", field="groups")
        if eps < 0:
            raise DataValidationError(f"eps must be >= 0, got {eps}", field="eps")

        self._name = name
        self.eps = float(eps)
        self.n_rows = len(groups)
        cell_keys = np.unique(np.column_stack([events, groups]), axis=0)
        self.cells: tuple[tuple[int, int], ...] = tuple(map(tuple, cell_keys.tolist()))
        lookup = {cell: c for c, cell in enumerate(self.cells)}
        self._row_cell = np.array(
            [lookup[(e, g)] for e, g in zip(events.tolist(), groups.tolist(), strict=True)],
            dtype=np.intp,
        )
        event_ids, self._row_event = np.unique(events, return_inverse=True)
        self._cell_event = np.searchsorted(event_ids, cell_keys[:, 0])
        self._cell_size = np.bincount(self._row_cell, minlength=len(self.cells)).astype(float)
        self._event_size = np.bincount(self._row_event).astype(float)

    @property
    def name(self) -> str:
        return self._name

    @property
    def n_constraints(self) -> int:
        return 2 * len(self.cells)

    def differences(self, predictions: NDArray[np.float64]) -> NDArray[np.float64]:
        """Cell mean minus event mean, one value per cell."""
        h = np.asarray(predictions, dtype=float).reshape(-1)
        if len(h) != self.n_rows:
            raise ShapeMismatchError(f"{len(h)} predictions for {self.n_rows} rows")
        cell_mean = np.bincount(self._row_cell, weights=h, minlength=len(self.cells))
        cell_mean /= self._cell_size
        event_mean = np.bincount(self._row_event, weights=h) / self._event_size
        return cell_mean - event_mean[self._cell_event]

    def gamma(self, predictions: NDArray[np.float64]) -> NDArray[np.float64]:
        diff = self.differences(predictions)
        return np.concatenate([diff, -diff]) - self.eps

    def violation(self, predictions: NDArray[np.float64]) -> float:
        return float(max(0.0, np.abs(self.differences(predictions)).max()))

    def signed_weights(self, multipliers: NDArray[np.float64]) -> NDArray[np.float64]:
        multipliers = np.asarray(multipliers, dtype=float)
        if multipliers.shape != (self.n_constraints,):
            raise ShapeMismatchError(
                f"{multipliers.shape[0]} multipliers for {self.n_constraints} constraints"
            )
        n_cells = len(self.cells)
        net = multipliers[:n_cells] - multipliers[n_cells:]
        per_event = np.bincount(self._cell_event, weights=net, minlength=len(self._event_size))
        return (
            net[self._row_cell] / self._cell_size[self._row_cell]
            - per_event[self._row_event] / self._event_size[self._row_event]
        )


def demographic_parity(groups: NDArray[np.intp], eps: float) -> ConditionalMeanParity:
    """Selection rate of every group within eps of the overall rate."""
    groups = np.asarray(groups, dtype=np.intp)
    return ConditionalMeanParity(
        ConstraintKind.DEMOGRAPHIC_PARITY.value, groups, np.zeros_like(groups), eps
    )


def equalized_odds(
    groups: NDArray[np.intp],
    targets: NDArray[np.float64],
    eps: float,
) -> ConditionalMeanParity:
    """TPR and FPR of every group within eps of the class-conditional overall rates."""
    y = np.asarray(targets, dtype=float).reshape(-1)
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataValidationError("Equalized odds needs binary targets", field="targets")
    return ConditionalMeanParity(
        ConstraintKind.EQUALIZED_ODDS.value, groups, y.astype(np.intp), eps
    )


def make_moment(
    kind: ConstraintKind | str,
    groups: NDArray[np.intp],
    targets: NDArray[np.float64],
    eps: float,
) -> ConditionalMeanParity:
    kind = ConstraintKind(kind)
    if kind is ConstraintKind.DEMOGRAPHIC_PARITY:
        return demographic_parity(groups, eps)
    return equalized_odds(groups, targets, eps)
