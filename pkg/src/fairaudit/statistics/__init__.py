"""Proxy-discrimination tests, attributions and bias decomposition regressions."""

from fairaudit.statistics.attribution import Attribution, linear_attribution
from fairaudit.statistics.two_sample import (
    DEFAULT_PERMUTATIONS,
    MulticlassTestResult,
    StatisticId,
    TwoSampleConfig,
    TwoSampleResult,
    auc_score,
    multiclass_attr_test,
    p_value,
    two_sample_test,
)
from fairaudit.statistics.decomposition import (
    DEMOGRAPHIC_BLOCK,
    FEATURE_BLOCK,
    PREDICTION_BLOCK,
    BiasKind,
    DecompositionFit,
    bias_decomposition,
    cell_decomposition,
    dataset_decomposition,
    dataset_residual_regression,
    instance_bias,
    residual_regression,
)
from fairaudit.statistics.vcov import VcovReport, coef_vcov_report

__all__ = [
    # Attribution
    "Attribution",
    "linear_attribution",
    # Two-sample tests
    "DEFAULT_PERMUTATIONS",
    "MulticlassTestResult",
    "StatisticId",
    "TwoSampleConfig",
    "TwoSampleResult",
    "auc_score",
    "multiclass_attr_test",
    "p_value",
    "two_sample_test",
    # Decomposition
    "DEMOGRAPHIC_BLOCK",
    "FEATURE_BLOCK",
    "PREDICTION_BLOCK",
    "BiasKind",
    "DecompositionFit",
    "bias_decomposition",
    "cell_decomposition",
    "dataset_decomposition",
    "dataset_residual_regression",
    "instance_bias",
    "residual_regression",
    # Covariance
    "VcovReport",
    "coef_vcov_report",
]
