"""
CSV ingestion and export.

The dialect is comma-separated, UTF-8, with a header row and '.' as decimal
point. An empty cell is a missing value: missing protected values become the
``unspecified`` level, missing features or labels are a load error.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from fairaudit.core.errors import SchemaError
from fairaudit.core.models import UNSPECIFIED, Dataset
from fairaudit.dataset.schema import ColumnRole, ColumnSchema


logger = logging.getLogger(__name__)


def load_csv(path: str | Path, schema: ColumnSchema) -> Dataset:
    """
    Load a CSV file into a validated Dataset.

    Every header column must have a role in ``schema`` and every schema column
    must be present. Rows are never dropped.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"CSV file not found: {path}", field=str(path))

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaError(f"Malformed CSV {path}: {e}", field=str(path)) from e

    header = [str(c) for c in frame.columns]
    for name in header:
        if name not in schema.roles:
            raise SchemaError(f"Column '{name}' has no role in the schema", field=name)
    for name in schema.roles:
        if name not in header:
            raise SchemaError(f"Schema column '{name}' is missing from {path.name}", field=name)

    features = [c for c in header if schema.roles[c] is ColumnRole.FEATURE]
    labels = [c for c in header if schema.roles[c] is ColumnRole.LABEL]
    protected_names = [c for c in header if schema.roles[c] is ColumnRole.PROTECTED]

    X = np.column_stack([_numeric_column(frame[c], c, "feature") for c in features])
    Y = np.column_stack([_numeric_column(frame[c], c, "label") for c in labels])

    if schema.task_kind.is_classification:
        for j, name in enumerate(labels):
            if not np.isin(Y[:, j], (0.0, 1.0)).all():
                raise SchemaError(
                    f"Label '{name}' has values outside {{0, 1}} for a classification task",
                    field=name,
                )

    protected = pd.DataFrame(
        {c: _protected_column(frame[c], c, schema.levels.get(c)) for c in protected_names}
    )

    ds = Dataset(
        features=X,
        targets=Y,
        protected=protected,
        task_kind=schema.task_kind,
        feature_names=tuple(features),
        label_names=tuple(labels),
    )
    logger.info(
        f"Loaded {path.name}: n={ds.n_rows}, p={ds.n_features}, K={ds.n_labels}, "
        f"d={len(protected_names)}"
    )
    return ds


def _numeric_column(column: pd.Series, name: str, role: str) -> np.ndarray:
    raw = column.str.strip()
    empty = raw == ""
    if empty.any():
        row = int(np.flatnonzero(empty.to_numpy())[0])
        raise SchemaError(f"Missing {role} value in column '{name}' at row {row + 1}", field=name)

    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(
            f"Non-numeric {role} value {raw.iloc[row]!r} in column '{name}' at row {row + 1}",
            field=name,
        )
    return values.to_numpy(dtype=float)


def _protected_column(
    column: pd.Series,
    name: str,
    declared: tuple[str, ...] | None,
) -> pd.Series:
    values = column.str.strip().replace("", UNSPECIFIED)
    observed = sorted(set(values) - {UNSPECIFIED})

    if declared is None:
        categories = [*observed, UNSPECIFIED]
    else:
        unknown = [v for v in observed if v not in declared]
        if unknown:
            raise SchemaError(
                f"Protected column '{name}' has undeclared levels: {unknown}", field=name
            )
        categories = [*declared, UNSPECIFIED]

    return pd.Series(pd.Categorical(values, categories=categories))


def write_csv(ds: Dataset, path: str | Path) -> None:
    """
    Write a dataset in the dialect ``load_csv`` reads.

    Columns are features, labels, then protected attributes. Unspecified
    protected values are written as empty cells.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame(np.asarray(ds.features), columns=list(ds.feature_names))
    targets = np.asarray(ds.targets)
    if ds.task_kind.is_classification:
        targets = targets.astype(np.int64)
    for j, name in enumerate(ds.label_names):
        frame[name] = targets[:, j]
    for name in ds.protected_names:
        values = ds.protected_values(name)
        frame[name] = np.where(values == UNSPECIFIED, "", values)

    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {ds.n_rows} rows to {path}")


def schema_for(ds: Dataset) -> ColumnSchema:
    """Column-role schema matching ``write_csv`` output for ``ds``."""
    roles: dict[str, ColumnRole] = {}
    roles.update({name: ColumnRole.FEATURE for name in ds.feature_names})
    roles.update({name: ColumnRole.LABEL for name in ds.label_names})
    roles.update({name: ColumnRole.PROTECTED for name in ds.protected_names})
    levels = {
        name: tuple(level for level in ds.levels(name) if level != UNSPECIFIED)
        for name in ds.protected_names
    }
    return ColumnSchema(roles=roles, task_kind=ds.task_kind, levels=levels)
