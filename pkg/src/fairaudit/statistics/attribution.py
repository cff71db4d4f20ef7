"""
Exact per-feature attributions for linear scores.

For a linear score s(x) = b·x + a the contribution of feature j on row i is
b_j (x_ij - mean_j). Contributions of a row add up to s(x_i) - mean(s).
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import ShapeMismatchError
from fairaudit.core.models import LinearFit, frozen_array


@dataclass(frozen=True, eq=False)
class Attribution:
    feature_names: tuple[str, ...]
    mean_abs: NDArray[np.float64]                   # length p
    contributions: NDArray[np.float64] | None       # n x p, only on request

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean_abs", frozen_array(self.mean_abs))
        if self.contributions is not None:
            object.__setattr__(self, "contributions", frozen_array(self.contributions))

    @property
    def share(self) -> NDArray[np.float64]:
        """Fraction of the total mean |contribution| held by each feature."""
        total = self.mean_abs.sum()
        return self.mean_abs / total if total > 0 else np.zeros_like(self.mean_abs)

    def ranking(self) -> list[tuple[str, float]]:
        order = np.argsort(-self.mean_abs, kind="stable")
        return [(self.feature_names[j], float(self.mean_abs[j])) for j in order]

    def to_dict(self) -> dict[str, Any]:
        return {
            "features": list(self.feature_names),
            "mean_abs": self.mean_abs,
            "share": self.share,
        }


def linear_attribution(
    fit: LinearFit,
    X: NDArray[np.float64],
    return_contributions: bool = False,
) -> Attribution:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fit.n_features:
        raise ShapeMismatchError(
            f"Expected {fit.n_features} input columns, got shape {X.shape}"
        )
    contributions = (X - X.mean(axis=0)) * fit.coefficients
    return Attribution(
        feature_names=fit.column_names,
        mean_abs=np.abs(contributions).mean(axis=0),
        contributions=contributions if return_contributions else None,
    )
