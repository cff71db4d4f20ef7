"""Seeded train/holdout splits."""

import math

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import ConfigError, DataValidationError
from fairaudit.core.models import Dataset
from fairaudit.core.rng import make_rng


def holdout_size(n: int, fraction: float) -> int:
    """round(n * fraction), halves rounded up."""
    return int(math.floor(n * fraction + 0.5))


def split_rows(
    n: int,
    holdout_fraction: float,
    rng: np.random.Generator,
    strata: NDArray[np.intp] | None = None,
) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """
    Split ``range(n)`` into sorted (train, holdout) index arrays.

    With ``strata``, each stratum contributes its largest-remainder share of
    the holdout so every part keeps the overall stratum proportions to within
    one row.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError(
            f"holdout_fraction must be in (0, 1), got {holdout_fraction}",
            field="holdout_fraction",
        )
    size = holdout_size(n, holdout_fraction)
    if size < 1 or size > n - 1:
        raise DataValidationError(
            f"Cannot split {n} rows with holdout_fraction={holdout_fraction}: a part would be empty"
        )

    if strata is None:
        holdout = rng.permutation(n)[:size]
    else:
        holdout = _stratified_holdout(np.asarray(strata), size, rng)

    mask = np.zeros(n, dtype=bool)
    mask[holdout] = True
    return np.flatnonzero(~mask), np.flatnonzero(mask)


def _stratified_holdout(
    strata: NDArray[np.intp],
    size: int,
    rng: np.random.Generator,
) -> NDArray[np.intp]:
    n = len(strata)
    values, counts = np.unique(strata, return_counts=True)
    if len(values) < 2 or counts.min() < 2:
        raise DataValidationError(
            "Stratification impossible: every stratum needs at least 2 rows, "
            f"got counts {dict(zip(values.tolist(), counts.tolist(), strict=True))}",
            field="stratify_label",
        )

    quotas = counts * size / n
    allocation = np.floor(quotas).astype(np.int64)
    remainder = size - int(allocation.sum())
    # Largest fractional parts first; ties go to the earlier stratum.
    order = np.lexsort((np.arange(len(values)), -(quotas - allocation)))
    allocation[order[:remainder]] += 1

    parts = []
    for value, take in zip(values, allocation, strict=True):
        rows = np.flatnonzero(strata == value)
        parts.append(rng.permutation(rows)[:take])
    return np.concatenate(parts)


def split_indices(
    ds: Dataset,
    holdout_fraction: float,
    seed: int,
    stratify_label: int | str | None = None,
) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """Row indices of the split ``split`` would produce."""
    strata = None
    if stratify_label is not None:
        if not ds.task_kind.is_classification:
            raise ConfigError(
                "Stratified splits need a classification dataset", field="stratify_label"
            )
        k = ds.label_index(stratify_label)
        strata = ds.targets[:, k].astype(np.intp)
    return split_rows(ds.n_rows, holdout_fraction, make_rng(seed), strata)


def split(
    ds: Dataset,
    holdout_fraction: float,
    seed: int,
    stratify_label: int | str | None = None,
) -> tuple[Dataset, Dataset]:
    """
    Split into (train, holdout) datasets.

    Holdout size is round(n * fraction). Rows keep their original order inside
    each part, and a fixed seed always gives the same partition.
    """
    train, holdout = split_indices(ds, holdout_fraction, seed, stratify_label)
    return ds.take(train), ds.take(holdout)
