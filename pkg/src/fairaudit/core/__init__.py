"""Core abstractions, data models, and utilities."""

from fairaudit.core.models import (
    UNSPECIFIED,
    AuditStage,
    CellStatus,
    ConfusionCounts,
    Dataset,
    FairnessTensor,
    FitKind,
    GroupKey,
    IntersectionIndex,
    LinearFit,
    MetricId,
    MetricTable,
    TaskKind,
    WeightMatrix,
    group_name,
)
from fairaudit.core.interfaces import (
    AuditObserver,
    BinaryLearner,
    Moment,
)
from fairaudit.core.errors import (
    AuditError,
    ConfigError,
    DataValidationError,
    InsufficientGroupsError,
    LearnerError,
    RankDeficiencyError,
    SchemaError,
    ShapeMismatchError,
    TensorMismatchError,
    UndefinedCellError,
)
from fairaudit.core.rng import check_seed, derive_seed, make_rng

__all__ = [
    # Models
    "UNSPECIFIED",
    "AuditStage",
    "CellStatus",
    "ConfusionCounts",
    "Dataset",
    "FairnessTensor",
    "FitKind",
    "GroupKey",
    "IntersectionIndex",
    "LinearFit",
    "MetricId",
    "MetricTable",
    "TaskKind",
    "WeightMatrix",
    "group_name",
    # Interfaces
    "AuditObserver",
    "BinaryLearner",
    "Moment",
    # Errors
    "AuditError",
    "ConfigError",
    "DataValidationError",
    "InsufficientGroupsError",
    "LearnerError",
    "RankDeficiencyError",
    "SchemaError",
    "ShapeMismatchError",
    "TensorMismatchError",
    "UndefinedCellError",
    # Random streams
    "check_seed",
    "derive_seed",
    "make_rng",
]
