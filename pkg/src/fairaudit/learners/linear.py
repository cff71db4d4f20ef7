"""
Ordinary least squares with coefficient covariance.

The fit uses a column-pivoted QR factorization of the intercept-augmented
design, so a rank-deficient design is detected and the dependent columns can
be named instead of silently regularized away.
"""

import logging
from collections.abc import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from fairaudit.core.errors import LearnerError, RankDeficiencyError, ShapeMismatchError
from fairaudit.core.models import FitKind, LinearFit


logger = logging.getLogger(__name__)

INTERCEPT = "intercept"


def fit_ols(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    column_names: Sequence[str] | None = None,
) -> LinearFit:
    """
    Least-squares fit of ``y`` on ``[1 | X]``.

    Residual variance is RSS / (n - p - 1) and ``vcov`` is
    sigma² (AᵀA)⁻¹ over the augmented design A, intercept first.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2:
        raise ShapeMismatchError(f"X must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if y.shape[0] != n:
        raise ShapeMismatchError(f"X has {n} rows but y has {y.shape[0]}")
    if n <= p + 1:
        raise LearnerError(f"OLS needs n > p + 1, got n={n}, p={p}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise LearnerError("OLS inputs must be finite")

    names = tuple(column_names) if column_names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise ShapeMismatchError(f"Expected {p} column names, got {len(names)}")

    A = np.column_stack([np.ones(n), X])
    Q, R, pivots = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tolerance = diag.max() * max(A.shape) * np.finfo(float).eps
    rank = int(np.sum(diag > tolerance))
    if rank < p + 1:
        augmented = (INTERCEPT, *names)
        dependent = [augmented[j] for j in pivots[rank:]]
        raise RankDeficiencyError(
            f"Design matrix has rank {rank} < {p + 1}; dependent columns: {dependent}",
            columns=dependent,
        )

    solution = scipy.linalg.solve_triangular(R, Q.T @ y)
    theta = np.empty(p + 1)
    theta[pivots] = solution

    residuals = y - A @ theta
    dof = n - p - 1
    sigma2 = float(residuals @ residuals / dof)

    r_inv = scipy.linalg.solve_triangular(R, np.eye(p + 1))
    unscaled = np.empty((p + 1, p + 1))
    unscaled[np.ix_(pivots, pivots)] = r_inv @ r_inv.T
    vcov = sigma2 * unscaled
    vcov = 0.5 * (vcov + vcov.T)

    logger.debug(f"OLS fit: n={n}, p={p}, sigma2={sigma2:.6g}")
    return LinearFit(
        coefficients=theta[1:],
        intercept=float(theta[0]),
        kind=FitKind.OLS,
        iterations=1,
        converged=True,
        optimality=float(np.max(np.abs(A.T @ residuals)) / n),
        residual_variance=sigma2,
        vcov=vcov,
        column_names=names,
    )


def ols_residuals(
    fit: LinearFit,
    X: NDArray[np.float64],
    y: NDArray[np.float64],
) -> NDArray[np.float64]:
    return np.asarray(y, dtype=float).reshape(-1) - fit.decision_function(X)
