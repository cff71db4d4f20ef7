"""
L2-regularized logistic regression fitted by iteratively reweighted least squares.

The objective is the mean (optionally weighted) log-loss plus (l2 / 2)·‖w‖²;
the intercept is never penalized. Each Newton step is halved until the
objective stops increasing. When the Newton system is singular or badly
conditioned the iteration falls back to a gradient step of size 1/L.
"""

import logging
import warnings
from collections.abc import Mapping
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
import scipy.linalg
from numpy.typing import NDArray
from scipy.special import expit

from fairaudit.core.errors import ConfigError, LearnerError, ShapeMismatchError
from fairaudit.core.models import FitKind, LinearFit


logger = logging.getLogger(__name__)

PROBA_CLIP = 1e-15
MAX_HALVINGS = 50
# Objective rounding noise tolerated when comparing steps near the optimum.
OBJECTIVE_SLACK = 1e-13


@dataclass(frozen=True)
class LogisticConfig:
    max_iter: int = 100
    tol: float = 1e-8
    l2: float = 0.0

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}", field="max_iter")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}", field="tol")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}", field="l2")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LogisticConfig":
        unknown = sorted(set(data) - {"max_iter", "tol", "l2"})
        if unknown:
            raise ConfigError(f"Unknown logistic config keys: {unknown}", field=unknown[0])
        return cls(**dict(data))


def _check_inputs(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    sample_weight: NDArray[np.float64] | None,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2:
        raise ShapeMismatchError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatchError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise LearnerError("Logistic targets must be 0 or 1")
    if sample_weight is None:
        weights = np.ones_like(y)
    else:
        weights = np.asarray(sample_weight, dtype=float).reshape(-1)
        if weights.shape != y.shape:
            raise ShapeMismatchError(
                f"sample_weight has {weights.shape[0]} rows, expected {len(y)}"
            )
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise LearnerError("sample_weight must be finite and non-negative")
    return X, y, weights


def logistic_objective(
    coef: NDArray[np.float64],
    intercept: float,
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    l2: float = 0.0,
    sample_weight: NDArray[np.float64] | None = None,
) -> float:
    """Mean weighted log-loss plus (l2 / 2)·‖coef‖²."""
    X, y, weights = _check_inputs(X, y, sample_weight)
    z = X @ np.asarray(coef, dtype=float) + intercept
    loss = np.logaddexp(0.0, z) - y * z
    return float(weights @ loss / len(y) + 0.5 * l2 * np.dot(coef, coef))


def logistic_gradient(
    coef: NDArray[np.float64],
    intercept: float,
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    l2: float = 0.0,
    sample_weight: NDArray[np.float64] | None = None,
) -> NDArray[np.float64]:
    """Gradient of ``logistic_objective`` as [d/d intercept, d/d coef...]."""
    X, y, weights = _check_inputs(X, y, sample_weight)
    coef = np.asarray(coef, dtype=float)
    residual = weights * (expit(X @ coef + intercept) - y) / len(y)
    return np.concatenate([[residual.sum()], X.T @ residual + l2 * coef])


def predict_proba(fit: LinearFit, X: NDArray[np.float64]) -> NDArray[np.float64]:
    """P(y = 1 | x), clipped to [1e-15, 1 - 1e-15]."""
    if fit.kind is not FitKind.LOGISTIC:
        raise LearnerError(f"predict_proba needs a logistic fit, got {fit.kind.value}")
    return np.clip(expit(fit.decision_function(X)), PROBA_CLIP, 1.0 - PROBA_CLIP)


def fit_logistic(
    X: NDArray[np.float64],
    y: NDArray[np.float64],
    cfg: LogisticConfig | None = None,
    sample_weight: NDArray[np.float64] | None = None,
    column_names: tuple[str, ...] = (),
) -> LinearFit:
    """
    Fit logistic regression by IRLS with step halving.

    A single-class target with l2 = 0 has no finite optimum; the result is an
    intercept-only fit at the smoothed log-odds, flagged as not converged.
    """
    cfg = cfg or LogisticConfig()
    X, y, weights = _check_inputs(X, y, sample_weight)
    n, p = X.shape
    if n < 2:
        raise LearnerError(f"Logistic regression needs n >= 2, got {n}")
    if weights.sum() <= 0:
        raise LearnerError("sample_weight sums to zero")

    positive = weights @ y
    if cfg.l2 == 0 and (positive == 0 or positive == weights.sum()):
        rate = (positive + 0.5) / (weights.sum() + 1.0)
        logger.warning(
            f"Single-class target with l2=0: returning intercept-only fit at rate {rate:.4f}"
        )
        return LinearFit(
            coefficients=np.zeros(p),
            intercept=float(np.log(rate / (1.0 - rate))),
            kind=FitKind.LOGISTIC,
            iterations=0,
            converged=False,
            regularization=0.0,
            optimality=float("inf"),
            column_names=column_names,
        )

    A = np.column_stack([np.ones(n), X])
    penalty = np.full(p + 1, cfg.l2)
    penalty[0] = 0.0
    # Lipschitz bound of the gradient, for the fallback step.
    lipschitz = 0.25 * weights.max() * np.linalg.norm(A, 2) ** 2 / n + cfg.l2

    def objective(theta: NDArray[np.float64]) -> float:
        return logistic_objective(theta[1:], theta[0], X, y, cfg.l2, weights)

    theta = np.zeros(p + 1)
    theta[0] = np.log((positive + 0.5) / (weights.sum() - positive + 0.5))
    current = objective(theta)
    trace = [current]
    grad_norm = float("inf")
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iter + 1):
        mu = expit(A @ theta)
        grad = logistic_gradient(theta[1:], theta[0], X, y, cfg.l2, weights)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < cfg.tol:
            converged = True
            iterations -= 1
            break

        hessian = (A * (weights * mu * (1.0 - mu))[:, None]).T @ A / n + np.diag(penalty)
        step = _newton_step(hessian, grad)

        accepted = False
        if step is not None:
            t = 1.0
            for _ in range(MAX_HALVINGS):
                candidate = theta - t * step
                value = objective(candidate)
                if value <= current + OBJECTIVE_SLACK * max(1.0, abs(current)):
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            candidate = theta - grad / lipschitz
            value = objective(candidate)
            if value > current:
                logger.debug(f"No descent step at iteration {iterations}; stopping")
                break

        theta, current = candidate, value
        trace.append(current)

    if not converged:
        grad = logistic_gradient(theta[1:], theta[0], X, y, cfg.l2, weights)
        grad_norm = float(np.linalg.norm(grad))
        converged = grad_norm < cfg.tol
    if not converged:
        logger.warning(
            f"Logistic fit did not converge after {iterations} iterations "
            f"(gradient norm {grad_norm:.3e}, l2={cfg.l2})"
        )

    return LinearFit(
        coefficients=theta[1:],
        intercept=float(theta[0]),
        kind=FitKind.LOGISTIC,
        iterations=iterations,
        converged=converged,
        regularization=cfg.l2,
        optimality=grad_norm,
        trace=tuple(trace),
        column_names=column_names,
    )


def _newton_step(
    hessian: NDArray[np.float64],
    grad: NDArray[np.float64],
) -> NDArray[np.float64] | None:
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            step = scipy.linalg.solve(hessian, grad, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            return None
    return step if np.all(np.isfinite(step)) else None


class LogisticLearner:
    """
    Logistic regression behind the BinaryLearner protocol, with a fixed
    configuration.
    """

    def __init__(self, config: LogisticConfig | None = None) -> None:
        self._config = config or LogisticConfig()

    @property
    def name(self) -> str:
        return f"logistic(l2={self._config.l2})"

    @property
    def config(self) -> LogisticConfig:
        return self._config

    def fit(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.float64],
        sample_weight: NDArray[np.float64] | None = None,
        column_names: tuple[str, ...] = (),
    ) -> LinearFit:
        return fit_logistic(
            X, y, self._config, sample_weight=sample_weight, column_names=column_names
        )

    def predict_proba(self, fit: LinearFit, X: NDArray[np.float64]) -> NDArray[np.float64]:
        return predict_proba(fit, X)
