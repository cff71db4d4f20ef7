"""Labeled coefficient covariance reports with multicollinearity flags."""

from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fairaudit.core.errors import ConfigError
from fairaudit.core.models import frozen_array
from fairaudit.statistics.decomposition import INTERCEPT_BLOCK, DecompositionFit


DEFAULT_CORRELATION_THRESHOLD = 0.9


@dataclass(frozen=True, eq=False)
class VcovReport:
    labels: tuple[str, ...]             # "block:column", intercept first
    matrix: NDArray[np.float64]
    correlation: NDArray[np.float64]    # NaN where a variance is zero
    threshold: float
    flagged_pairs: tuple[tuple[str, str, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", frozen_array(self.matrix))
        object.__setattr__(self, "correlation", frozen_array(self.correlation))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, index=list(self.labels), columns=list(self.labels))

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "matrix": self.matrix,
            "correlation": self.correlation,
            "threshold": self.threshold,
            "flagged_pairs": [
                {"a": a, "b": b, "correlation": r} for a, b, r in self.flagged_pairs
            ],
        }


def coef_vcov_report(
    fit: DecompositionFit,
    threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> VcovReport:
    """
    Full covariance matrix with block-labelled rows and columns.

    Coefficient pairs whose correlation has |r| >= threshold are flagged as
    a multicollinearity warning.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must be in (0, 1], got {threshold}", field="threshold")
    labels = tuple(
        name if block == INTERCEPT_BLOCK else f"{block}:{name}"
        for block, name in zip(fit.all_blocks, fit.names, strict=True)
    )
    matrix = np.array(fit.vcov)
    sd = np.sqrt(np.clip(np.diag(matrix), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        correlation = matrix / np.outer(sd, sd)
    correlation[np.outer(sd, sd) == 0] = np.nan

    rows, cols = np.triu_indices(len(labels), k=1)
    flagged = tuple(
        (labels[i], labels[j], float(correlation[i, j]))
        for i, j in zip(rows, cols, strict=True)
        if np.isfinite(correlation[i, j]) and abs(correlation[i, j]) >= threshold
    )
    return VcovReport(
        labels=labels,
        matrix=matrix,
        correlation=correlation,
        threshold=threshold,
        flagged_pairs=flagged,
    )
