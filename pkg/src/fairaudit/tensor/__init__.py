"""Intersectional multi-label fairness tensors."""

from fairaudit.tensor.build import (
    BuildMode,
    MetricGrid,
    PairwiseVector,
    apply_weights,
    build_tensor,
    metric_by_group_and_label,
    pairwise_group_vector,
)
from fairaudit.tensor.aggregate import (
    HARMONIC_EPSILON,
    AggregateResult,
    AggregateScheme,
    TensorComparison,
    aggregate,
    compare_models,
)
from fairaudit.tensor.weights import (
    load_weight_matrix,
    weight_matrix_from_dict,
    weights_from_ranking,
)
from fairaudit.tensor.export import write_tensor

__all__ = [
    # Construction
    "BuildMode",
    "MetricGrid",
    "PairwiseVector",
    "apply_weights",
    "build_tensor",
    "metric_by_group_and_label",
    "pairwise_group_vector",
    # Aggregation
    "HARMONIC_EPSILON",
    "AggregateResult",
    "AggregateScheme",
    "TensorComparison",
    "aggregate",
    "compare_models",
    # Weights
    "load_weight_matrix",
    "weight_matrix_from_dict",
    "weights_from_ranking",
    # Output
    "write_tensor",
]
