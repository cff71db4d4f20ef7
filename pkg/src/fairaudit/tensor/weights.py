"""
Stakeholder weight matrices.

Weights come either as an explicit L x K matrix or as preference rankings of
groups and labels. Rankings are Borda-scored: among m items, the item at
position r (0-based) of a ranking scores m - r and unranked items score 0.
The weight of (group l, label k) is score(l) * score(k). A missing ranking
scores every item 1.
"""

from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from fairaudit.core.errors import ConfigError
from fairaudit.core.models import GroupKey, WeightMatrix, group_name
from fairaudit.core.serialization import load_json
from fairaudit.dataset.schema import SPEC_VERSION


def borda_scores(ranking: Sequence[str] | None, items: Sequence[str], what: str) -> np.ndarray:
    if ranking is None:
        return np.ones(len(items))
    ranking = [str(r) for r in ranking]
    unknown = sorted(set(ranking) - set(items))
    if unknown:
        raise ConfigError(f"Unknown {what} in ranking: {unknown}", field=f"{what}_ranking")
    if len(set(ranking)) != len(ranking):
        raise ConfigError(f"Duplicate {what} in ranking", field=f"{what}_ranking")
    m = len(items)
    position = {name: r for r, name in enumerate(ranking)}
    return np.array([m - position[name] if name in position else 0 for name in items], dtype=float)


def weights_from_ranking(
    group_ranking: Sequence[str] | None,
    label_ranking: Sequence[str] | None,
    groups: Sequence[GroupKey],
    labels: Sequence[str],
    normalize: bool = False,
) -> WeightMatrix:
    """Borda-scored L x K weights; groups are named ``level|level``."""
    group_scores = borda_scores(group_ranking, [group_name(g) for g in groups], "group")
    label_scores = borda_scores(label_ranking, list(labels), "label")
    weights = WeightMatrix(np.outer(group_scores, label_scores))
    return weights.normalize() if normalize else weights


def weight_matrix_from_dict(
    data: Mapping[str, Any],
    groups: Sequence[GroupKey],
    labels: Sequence[str],
) -> WeightMatrix:
    """
    Build weights from a JSON document.

    Accepted keys: ``weights`` (rows in group order, optionally reordered by
    ``groups``/``labels`` name lists), or ``group_ranking``/``label_ranking``;
    ``normalize`` rescales rows to sum to 1.
    """
    version = data.get("spec_version", SPEC_VERSION)
    if version != SPEC_VERSION:
        raise ConfigError(f"Unsupported spec_version '{version}'", field="spec_version")
    known = {"spec_version", "weights", "groups", "labels", "group_ranking",
             "label_ranking", "normalize"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown weight document keys: {unknown}", field=unknown[0])

    normalize = bool(data.get("normalize", False))
    if "weights" not in data:
        return weights_from_ranking(
            data.get("group_ranking"), data.get("label_ranking"), groups, labels, normalize
        )

    matrix = np.asarray(data["weights"], dtype=float)
    group_names = [group_name(g) for g in groups]
    if "groups" in data or "labels" in data:
        row_names = [str(g) for g in data.get("groups", group_names)]
        col_names = [str(k) for k in data.get("labels", labels)]
        if sorted(row_names) != sorted(group_names) or sorted(col_names) != sorted(labels):
            raise ConfigError("Weight document names do not match the audited groups/labels",
                              field="weights")
        if matrix.shape != (len(row_names), len(col_names)):
            raise ConfigError(f"Weights shape {matrix.shape} does not match its name lists",
                              field="weights")
        matrix = matrix[np.ix_([row_names.index(g) for g in group_names],
                               [col_names.index(k) for k in labels])]
    if matrix.shape != (len(groups), len(labels)):
        raise ConfigError(
            f"Weights shape {matrix.shape}, expected ({len(groups)}, {len(labels)})",
            field="weights",
        )
    weights = WeightMatrix(matrix)
    return weights.normalize() if normalize else weights


def load_weight_matrix(
    path: str | Path,
    groups: Sequence[GroupKey],
    labels: Sequence[str],
) -> WeightMatrix:
    return weight_matrix_from_dict(load_json(path), groups, labels)
