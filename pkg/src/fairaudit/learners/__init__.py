"""Self-contained linear learners."""

from fairaudit.learners.logistic import (
    LogisticConfig,
    LogisticLearner,
    fit_logistic,
    logistic_gradient,
    logistic_objective,
    predict_proba,
)
from fairaudit.learners.linear import INTERCEPT, fit_ols, ols_residuals
from fairaudit.learners.lasso import (
    LassoConfig,
    fit_lasso,
    fit_multitask_lasso,
    lasso_lambda_max,
)
from fairaudit.learners.multilabel import (
    MODEL_VERSION,
    MultiLabelModel,
    ProtectedEncoding,
    encode_protected,
    fit_encoding,
    fit_multilabel,
    fit_multitask_regression,
)

__all__ = [
    "LogisticConfig",
    "LogisticLearner",
    "fit_logistic",
    "logistic_gradient",
    "logistic_objective",
    "predict_proba",
    "INTERCEPT",
    "fit_ols",
    "ols_residuals",
    "LassoConfig",
    "fit_lasso",
    "fit_multitask_lasso",
    "lasso_lambda_max",
    "MODEL_VERSION",
    "MultiLabelModel",
    "ProtectedEncoding",
    "encode_protected",
    "fit_encoding",
    "fit_multilabel",
    "fit_multitask_regression",
]
