"""Dataset loading, validation, splitting, synthesis and quality reporting."""

from fairaudit.dataset.schema import SPEC_VERSION, ColumnRole, ColumnSchema
from fairaudit.dataset.loader import load_csv, schema_for, write_csv
from fairaudit.dataset.intersections import DEFAULT_MIN_SUPPORT, derive_intersections
from fairaudit.dataset.splitting import holdout_size, split, split_indices, split_rows
from fairaudit.dataset.synthetic import (
    AttributeSpec,
    LabelEffect,
    SynthConfig,
    generate_synthetic,
)
from fairaudit.dataset.quality import QualityReport, data_quality_report

__all__ = [
    "SPEC_VERSION",
    "ColumnRole",
    "ColumnSchema",
    "load_csv",
    "schema_for",
    "write_csv",
    "DEFAULT_MIN_SUPPORT",
    "derive_intersections",
    "holdout_size",
    "split",
    "split_indices",
    "split_rows",
    "AttributeSpec",
    "LabelEffect",
    "SynthConfig",
    "generate_synthetic",
    "QualityReport",
    "data_quality_report",
]
