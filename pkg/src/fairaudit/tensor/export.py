"""Tensor output: JSON with axis labels, or flat CSV rows (l, k1, k2, value)."""

from pathlib import Path

from fairaudit.core.errors import ConfigError
from fairaudit.core.models import FairnessTensor
from fairaudit.core.serialization import dump_json


def write_tensor(t: FairnessTensor, path: str | Path, fmt: str = "json") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        dump_json(t, path)
    elif fmt == "csv":
        t.to_frame().to_csv(path, index=False, lineterminator="\n")
    else:
        raise ConfigError(f"Unknown tensor format '{fmt}'", field="format")
