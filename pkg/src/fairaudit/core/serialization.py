"""JSON helpers shared by every report and model document."""

import json
import math
from collections.abc import Mapping
from enum import Enum
from pathlib import Path
from typing import Any, TextIO

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """
    Convert an object tree into plain JSON types.

    numpy scalars and arrays become Python numbers and lists, enums become
    their values, tuples become lists and non-finite floats become ``None``.
    Objects exposing ``to_dict`` are converted through it.
    """
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.ndim else to_jsonable(obj.item())
    if isinstance(obj, Mapping):
        return {str(to_jsonable(k)): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps_json(obj: Any) -> str:
    """Serialize with sorted keys so identical inputs give identical bytes."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def dump_json(obj: Any, target: str | Path | TextIO) -> None:
    text = dumps_json(obj)
    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        target.write(text)


def load_json(path: str | Path) -> Any:
    path_obj = Path(path)
    if not path_obj.exists():
        raise FileNotFoundError(f"JSON document not found: {path}")
    return json.loads(path_obj.read_text(encoding="utf-8"))


def array_or_nan(values: Any) -> np.ndarray:
    """Inverse of ``to_jsonable`` for numeric arrays: ``None`` becomes NaN."""
    if isinstance(values, list):
        return np.array(
            [array_or_nan(v) if isinstance(v, list) else (np.nan if v is None else v)
             for v in values],
            dtype=float,
        )
    return np.asarray(np.nan if values is None else values, dtype=float)
