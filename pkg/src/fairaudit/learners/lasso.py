"""
Lasso and multi-task lasso by cyclic coordinate descent.

The fitted objectives are on the original column scale:

    lasso:       1/(2n) ‖y - Xβ - α‖² + λ ‖β‖₁
    multi-task:  1/(2n) ‖Y - XB - 1αᵀ‖²_F + λ Σ_j ‖B_j.‖₂

Columns are centered and scaled to unit (population) variance internally as a
preconditioner only: with b_j = β_j·s_j the penalty on column j becomes
(λ/s_j)‖b_j‖, so the standardized descent solves the same problem. Constant
columns carry no information and always get a zero coefficient.
"""

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import ConfigError, LearnerError, ShapeMismatchError
from fairaudit.core.models import FitKind, LinearFit


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LassoConfig:
    max_iter: int = 10_000
    tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}", field="max_iter")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}", field="tol")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LassoConfig":
        unknown = sorted(set(data) - {"max_iter", "tol"})
        if unknown:
            raise ConfigError(f"Unknown lasso config keys: {unknown}", field=unknown[0])
        return cls(**dict(data))


def _standardize(X: NDArray[np.float64]) -> tuple[NDArray[np.float64], ...]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    active = scale > 0
    Z = np.zeros_like(X)
    Z[:, active] = (X[:, active] - mean[active]) / scale[active]
    return Z, mean, scale, active


def _check(X: NDArray[np.float64], Y: NDArray[np.float64], lam: float) -> None:
    if X.ndim != 2:
        raise ShapeMismatchError(f"X must be 2-D, got shape {X.shape}")
    if Y.shape[0] != X.shape[0]:
        raise ShapeMismatchError(f"X has {X.shape[0]} rows but targets have {Y.shape[0]}")
    if X.shape[0] < 2:
        raise LearnerError("Lasso needs at least 2 rows")
    if lam < 0:
        raise ConfigError(f"Regularization must be >= 0, got {lam}", field="lambda")


def lasso_lambda_max(X: NDArray[np.float64], y: NDArray[np.float64]) -> float:
    """
    Smallest λ with an all-zero solution: max_j |X_jᵀ(y - ȳ)| / n.

    With several target columns the row norm ‖X_jᵀ(Y - Ȳ)‖₂ / n is used, the
    threshold of the multi-task problem.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(y, dtype=float).reshape(X.shape[0], -1)
    correlations = X.T @ (Y - Y.mean(axis=0)) / X.shape[0]
    return float(np.max(np.linalg.norm(correlations, axis=1)))


def _block_coordinate_descent(
    Z: NDArray[np.float64],
    Y: NDArray[np.float64],
    scale: NDArray[np.float64],
    active: NDArray[np.bool_],
    lam: float,
    cfg: LassoConfig,
) -> tuple[NDArray[np.float64], int, bool, list[float]]:
    """
    Row-wise group soft-thresholding on centered targets and standardized columns.

    Row j is thresholded at λ/s_j so that the penalty matches λ‖β_j‖ on the
    original scale. With a single target the group threshold reduces to the
    scalar one. The trace and the tolerance are on the original scale too.
    """
    n, p = Z.shape
    B = np.zeros((p, Y.shape[1]))
    R = Y.copy()
    col_sq = (Z ** 2).sum(axis=0) / n
    inv_scale = np.zeros(p)
    inv_scale[active] = 1.0 / scale[active]

    def objective() -> float:
        penalty = np.linalg.norm(B, axis=1) @ inv_scale
        return float(0.5 * np.sum(R ** 2) / n + lam * penalty)

    trace = [objective()]
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iter + 1):
        max_update = 0.0
        for j in np.flatnonzero(active):
            old = B[j].copy()
            c = Z[:, j] @ R / n + col_sq[j] * old
            norm = np.linalg.norm(c)
            threshold = lam * inv_scale[j]
            shrink = max(0.0, 1.0 - threshold / norm) if norm > 0 else 0.0
            new = shrink * c / col_sq[j]
            delta = new - old
            if np.any(delta != 0):
                R -= np.outer(Z[:, j], delta)
                B[j] = new
                max_update = max(max_update, float(np.max(np.abs(delta))) * inv_scale[j])
        trace.append(objective())
        if max_update < cfg.tol:
            converged = True
            break
    return B, sweeps, converged, trace


def fit_lasso(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    lam: float,
    cfg: LassoConfig | None = None,
    column_names: tuple[str, ...] = (),
) -> LinearFit:
    """Lasso fit; converged when the largest coefficient update of a sweep is below tol."""
    cfg = cfg or LassoConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    _check(X, y, lam)

    Z, mean, scale, active = _standardize(X)
    B, sweeps, converged, trace = _block_coordinate_descent(
        Z, (y - y.mean())[:, None], scale, active, lam, cfg
    )
    coef = np.zeros(X.shape[1])
    coef[active] = B[active, 0] / scale[active]
    intercept = float(y.mean() - mean @ coef)

    if not converged:
        logger.warning(f"Lasso did not converge in {cfg.max_iter} sweeps (lambda={lam})")
    return LinearFit(
        coefficients=coef,
        intercept=intercept,
        kind=FitKind.LASSO,
        iterations=sweeps,
        converged=converged,
        regularization=float(lam),
        optimality=float(trace[-2] - trace[-1]) if len(trace) > 1 else 0.0,
        trace=tuple(trace),
        column_names=column_names,
    )


def fit_multitask_lasso(
    X: NDArray[np.float64],
    Y: NDArray[np.float64],
    lam: float,
    cfg: LassoConfig | None = None,
    column_names: tuple[str, ...] = (),
) -> list[LinearFit]:
    """
    Multi-task lasso: one fit per target column with a shared support.

    A feature's coefficient row is either zero for every task or nonzero for
    all of them.
    """
    cfg = cfg or LassoConfig()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ShapeMismatchError(f"Y must be 2-D, got shape {Y.shape}")
    _check(X, Y, lam)

    Z, mean, scale, active = _standardize(X)
    y_mean = Y.mean(axis=0)
    B, sweeps, converged, trace = _block_coordinate_descent(
        Z, Y - y_mean, scale, active, lam, cfg
    )

    coef = np.zeros((X.shape[1], Y.shape[1]))
    coef[active] = B[active] / scale[active, None]
    support = int(np.sum(np.any(coef != 0, axis=1)))
    logger.info(
        f"Multi-task lasso: K={Y.shape[1]}, lambda={lam}, support={support}/{X.shape[1]}, "
        f"sweeps={sweeps}, converged={converged}"
    )
    if not converged:
        logger.warning(f"Multi-task lasso did not converge in {cfg.max_iter} sweeps")

    return [
        LinearFit(
            coefficients=coef[:, k],
            intercept=float(y_mean[k] - mean @ coef[:, k]),
            kind=FitKind.MULTITASK_ROW,
            iterations=sweeps,
            converged=converged,
            regularization=float(lam),
            trace=tuple(trace),
            column_names=column_names,
        )
        for k in range(Y.shape[1])
    ]
