"""
fairaudit - intersectional multi-label fairness auditing

This package provides:
- Dataset loading, validation, splitting and a seeded synthetic generator
- Linear learners (logistic, OLS, lasso, multi-task lasso)
- Per-(label, group) metrics, disparities and the fairness tensor
- Proxy-discrimination tests and bias decomposition regressions
- Threshold and exponentiated-gradient mitigation with trade-off reports
"""

__version__ = "0.1.0"
__author__ = "fairaudit Contributors"

from fairaudit.core.models import (
    Dataset,
    FairnessTensor,
    IntersectionIndex,
    MetricId,
    MetricTable,
    TaskKind,
)

__all__ = [
    "Dataset",
    "FairnessTensor",
    "IntersectionIndex",
    "MetricId",
    "MetricTable",
    "TaskKind",
    "__version__",
]
