"""
Bias decomposition regressions.

A per-instance bias quantity is regressed by OLS on a stacked design

    bias_i = alpha + sum_j beta_j X_ij + sum_k gamma_k Yhat_ik + sum_l delta_l D_il + e_i

where X are features, Yhat predicted labels and D reference-coded demographic
indicators. Every coefficient is tagged with the block it came from. The fit
itself is ``learners.fit_ols`` on the stacked design.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy import stats

from fairaudit.core.errors import DataValidationError, RankDeficiencyError, ShapeMismatchError
from fairaudit.core.models import Dataset, LinearFit, MetricTable, frozen_array
from fairaudit.learners.linear import INTERCEPT, fit_ols
from fairaudit.learners.multilabel import encode_protected


logger = logging.getLogger(__name__)

FEATURE_BLOCK = "feature"
PREDICTION_BLOCK = "prediction"
DEMOGRAPHIC_BLOCK = "demographic"
INTERCEPT_BLOCK = "intercept"


class BiasKind(Enum):
    SIGNED = "signed"        # y_true - y_pred
    ABSOLUTE = "absolute"    # |y_true - y_pred|


def instance_bias(
    y_true: NDArray[np.float64],
    y_pred: NDArray[np.float64],
    kind: BiasKind | str,
) -> NDArray[np.float64]:
    """Per-instance dependent variable; the caller must choose signed or absolute."""
    kind = BiasKind(kind)
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(f"Shapes differ: {y_true.shape} vs {y_pred.shape}")
    residual = y_true - y_pred
    return residual if kind is BiasKind.SIGNED else np.abs(residual)


@dataclass(frozen=True, eq=False)
class DecompositionFit:
    """OLS fit of a bias quantity with every coefficient mapped to its block."""
    fit: LinearFit
    blocks: tuple[str, ...]            # one per coefficient, excluding the intercept
    residuals: NDArray[np.float64]
    n_obs: int

    def __post_init__(self) -> None:
        if len(self.blocks) != self.fit.n_features:
            raise ShapeMismatchError(
                f"{len(self.blocks)} block tags for {self.fit.n_features} coefficients"
            )
        object.__setattr__(self, "residuals", frozen_array(self.residuals))

    @property
    def alpha(self) -> float:
        return self.fit.intercept

    def block(self, name: str) -> dict[str, float]:
        """Coefficients of one block by column name."""
        return {
            column: float(coef)
            for column, coef, block in zip(
                self.fit.column_names, self.fit.coefficients, self.blocks, strict=True
            )
            if block == name
        }

    @property
    def beta(self) -> dict[str, float]:
        return self.block(FEATURE_BLOCK)

    @property
    def gamma(self) -> dict[str, float]:
        return self.block(PREDICTION_BLOCK)

    @property
    def delta(self) -> dict[str, float]:
        return self.block(DEMOGRAPHIC_BLOCK)

    @property
    def sigma2(self) -> float:
        return float(self.fit.residual_variance or 0.0)

    @property
    def dof(self) -> int:
        return self.n_obs - self.fit.n_features - 1

    @property
    def names(self) -> tuple[str, ...]:
        """Intercept first, then the coefficient columns, matching ``vcov``."""
        return (INTERCEPT, *self.fit.column_names)

    @property
    def all_blocks(self) -> tuple[str, ...]:
        return (INTERCEPT_BLOCK, *self.blocks)

    @property
    def params(self) -> NDArray[np.float64]:
        return np.concatenate([[self.fit.intercept], self.fit.coefficients])

    @property
    def vcov(self) -> NDArray[np.float64]:
        if self.fit.vcov is None:
            raise DataValidationError("Decomposition fit carries no covariance matrix")
        return self.fit.vcov

    @property
    def std_errors(self) -> NDArray[np.float64]:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def t_values(self) -> NDArray[np.float64]:
        se = self.std_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self.params / se
        return np.where(se > 0, t, np.nan)

    @property
    def p_values(self) -> NDArray[np.float64]:
        """Two-sided Student-t p-values with n - p - 1 degrees of freedom."""
        return 2.0 * stats.t.sf(np.abs(self.t_values), self.dof)

    def conf_int(self, alpha: float = 0.05) -> NDArray[np.float64]:
        """(p + 1) x 2 array of lower/upper bounds, intercept first."""
        q = stats.t.ppf(1.0 - alpha / 2.0, self.dof)
        half = q * self.std_errors
        return np.column_stack([self.params - half, self.params + half])

    def summary_frame(self) -> pd.DataFrame:
        bounds = self.conf_int()
        return pd.DataFrame({
            "block": list(self.all_blocks),
            "column": list(self.names),
            "coef": self.params,
            "std_err": self.std_errors,
            "t": self.t_values,
            "p_value": self.p_values,
            "ci_low": bounds[:, 0],
            "ci_high": bounds[:, 1],
        })

    def to_dict(self) -> dict[str, Any]:
        frame = self.summary_frame()
        return {
            "n_obs": self.n_obs,
            "dof": self.dof,
            "sigma2": self.sigma2,
            "alpha": self.alpha,
            "coefficients": frame.to_dict(orient="records"),
            "vcov": self.vcov,
        }


def _fit_blocks(
    y: NDArray[np.float64],
    parts: Sequence[tuple[str, NDArray[np.float64], Sequence[str]]],
) -> DecompositionFit:
    y = np.asarray(y, dtype=float).reshape(-1)
    matrices, names, blocks = [], [], []
    for block, matrix, columns in parts:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.shape[0] != len(y):
            raise ShapeMismatchError(
                f"{block} block has {matrix.shape[0]} rows, expected {len(y)}", field=block
            )
        if matrix.shape[1] != len(columns):
            raise ShapeMismatchError(
                f"{block} block has {matrix.shape[1]} columns but {len(columns)} names",
                field=block,
            )
        matrices.append(matrix)
        names.extend(str(c) for c in columns)
        blocks.extend([block] * len(columns))
    if len(set(names)) != len(names):
        raise DataValidationError("Decomposition column names must be unique")

    design = np.hstack(matrices) if matrices else np.zeros((len(y), 0))
    block_of = dict(zip(names, blocks, strict=True)) | {INTERCEPT: INTERCEPT_BLOCK}
    try:
        fit = fit_ols(design, y, column_names=names)
    except RankDeficiencyError as e:
        offending = [block_of[c] for c in e.columns]
        raise RankDeficiencyError(
            f"{e.message}; blocks: {offending}", columns=e.columns, blocks=offending
        ) from e

    residuals = y - fit.decision_function(design)
    logger.info(
        f"Decomposition fit: n={len(y)}, columns={len(names)}, sigma2={fit.residual_variance:.6g}"
    )
    return DecompositionFit(fit=fit, blocks=tuple(blocks), residuals=residuals, n_obs=len(y))


def bias_decomposition(
    bias: NDArray[np.float64],
    X: NDArray[np.float64],
    Yhat: NDArray[np.float64],
    D: NDArray[np.float64],
    feature_names: Sequence[str],
    label_names: Sequence[str],
    demographic_names: Sequence[str],
) -> DecompositionFit:
    """One OLS fit of ``bias`` on [X | Yhat | D] with an intercept."""
    return _fit_blocks(bias, [
        (FEATURE_BLOCK, X, feature_names),
        (PREDICTION_BLOCK, Yhat, [f"pred:{name}" for name in label_names]),
        (DEMOGRAPHIC_BLOCK, D, demographic_names),
    ])


def residual_regression(
    y_true: NDArray[np.float64],
    y_pred: NDArray[np.float64],
    D: NDArray[np.float64],
    demographic_names: Sequence[str],
) -> DecompositionFit:
    """Residuals y - y_hat regressed on demographic indicators only."""
    residual = instance_bias(y_true, y_pred, BiasKind.SIGNED)
    if residual.ndim != 1:
        raise ShapeMismatchError("residual_regression needs one label's outputs")
    return _fit_blocks(residual, [(DEMOGRAPHIC_BLOCK, D, demographic_names)])


def dataset_decomposition(
    ds: Dataset,
    bias: NDArray[np.float64],
    preds: NDArray[np.float64],
    attrs: Sequence[str] | None = None,
) -> DecompositionFit:
    """``bias_decomposition`` with the dataset's features and reference-coded demographics."""
    D, encoding = encode_protected(ds, attrs)
    return bias_decomposition(
        bias, ds.features, preds, D, ds.feature_names, ds.label_names, encoding.columns
    )


def dataset_residual_regression(
    ds: Dataset,
    preds: NDArray[np.float64],
    label: int | str,
    attrs: Sequence[str] | None = None,
) -> DecompositionFit:
    k = ds.label_index(label)
    D, encoding = encode_protected(ds, attrs)
    return residual_regression(ds.targets[:, k], np.asarray(preds)[:, k], D, encoding.columns)


def cell_decomposition(
    table: MetricTable,
    attrs: Sequence[str],
    include_flagged: bool = False,
) -> DecompositionFit:
    """
    Cell-level entry point: regress defined metric cells on label indicators
    (prediction block) and demographic level indicators.

    Group keys hold one level per attribute in ``attrs`` order. The first
    label and the first level of each attribute, in table order, are the
    references.
    """
    if any(len(key) != len(attrs) for key in table.group_keys):
        raise ShapeMismatchError("Group keys do not match the attribute list", field="attrs")
    mask = table.defined.copy()
    if not include_flagged:
        mask &= ~table.flagged[None, :]
    ks, gs = np.nonzero(mask)
    y = table.values[ks, gs]

    labels = table.label_names
    label_block = np.zeros((len(ks), len(labels) - 1))
    for k in range(1, len(labels)):
        label_block[:, k - 1] = ks == k
    label_columns = [f"label={name}" for name in labels[1:]]

    demo_blocks, demo_columns = [], []
    for a, attr in enumerate(attrs):
        levels = list(dict.fromkeys(key[a] for key in table.group_keys))
        cell_levels = np.array([table.group_keys[g][a] for g in gs], dtype=object)
        for level in levels[1:]:
            demo_blocks.append(cell_levels == level)
            demo_columns.append(f"{attr}={level}")
    demo = np.column_stack(demo_blocks) if demo_blocks else np.zeros((len(ks), 0))

    return _fit_blocks(y, [
        (PREDICTION_BLOCK, label_block, label_columns),
        (DEMOGRAPHIC_BLOCK, demo, demo_columns),
    ])
