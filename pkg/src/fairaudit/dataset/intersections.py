"""Intersectional group derivation."""

import logging
from collections.abc import Sequence

import numpy as np

from fairaudit.core.errors import DataValidationError
from fairaudit.core.models import Dataset, IntersectionIndex


logger = logging.getLogger(__name__)

DEFAULT_MIN_SUPPORT = 30


def derive_intersections(
    ds: Dataset,
    attrs: Sequence[str],
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> IntersectionIndex:
    """
    Partition the rows by the joint levels of ``attrs``.

    Only observed combinations become groups. Groups are ordered
    lexicographically by each attribute's level order, so the first attribute
    varies slowest. Groups under ``min_support`` rows are kept and flagged.
    """
    attrs = tuple(attrs)
    if not attrs:
        raise DataValidationError("At least one protected attribute is required", field="attrs")
    if len(set(attrs)) != len(attrs):
        raise DataValidationError(f"Duplicate attributes in {list(attrs)}", field="attrs")
    if min_support < 0:
        raise DataValidationError(
            f"min_support must be >= 0, got {min_support}", field="min_support"
        )

    codes = np.column_stack([ds.protected_codes(a) for a in attrs])
    level_sets = [ds.levels(a) for a in attrs]

    combos, inverse = np.unique(codes, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    groups = tuple(
        tuple(level_sets[j][int(c)] for j, c in enumerate(row)) for row in combos
    )
    members = tuple(np.flatnonzero(inverse == g) for g in range(len(groups)))

    index = IntersectionIndex(
        attributes=attrs,
        groups=groups,
        members=members,
        min_support=int(min_support),
        n_rows=ds.n_rows,
    )
    n_flagged = int(index.flagged.sum())
    logger.info(
        f"Derived {index.n_groups} groups over {list(attrs)} "
        f"({n_flagged} below min_support={min_support})"
    )
    return index
