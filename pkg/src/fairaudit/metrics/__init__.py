"""Per-(label, group) metrics, gaps, disparities and calibration."""

from fairaudit.metrics.confusion import confusion, label_names_for
from fairaudit.metrics.classification import classification_metric, classification_tables
from fairaudit.metrics.regression import regression_group_metrics
from fairaudit.metrics.gaps import (
    Disparity,
    GapMode,
    GapVector,
    disparate_impact,
    disparity,
    equalized_odds_difference,
    fairness_gap,
)
from fairaudit.metrics.calibration import CalibrationTable, calibration_by_group
from fairaudit.metrics.tables import check_metrics, metric_tables

__all__ = [
    # Counts
    "confusion",
    "label_names_for",
    # Tables
    "classification_metric",
    "classification_tables",
    "regression_group_metrics",
    "check_metrics",
    "metric_tables",
    # Comparisons
    "Disparity",
    "GapMode",
    "GapVector",
    "disparate_impact",
    "disparity",
    "equalized_odds_difference",
    "fairness_gap",
    # Calibration
    "CalibrationTable",
    "calibration_by_group",
]
