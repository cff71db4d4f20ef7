"""Column-role schema documents for CSV datasets."""

from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from fairaudit.core.errors import SchemaError
from fairaudit.core.models import UNSPECIFIED, TaskKind
from fairaudit.core.serialization import load_json


SPEC_VERSION = "1.0"


class ColumnRole(Enum):
    FEATURE = "feature"
    LABEL = "label"
    PROTECTED = "protected"
    IGNORE = "ignore"


@dataclass(frozen=True)
class ColumnSchema:
    """
    Role of every CSV column plus declared protected level orders.

    ``levels`` is optional per attribute; an attribute without a declaration
    takes its sorted observed levels. The ``unspecified`` level is implicit.
    """
    roles: Mapping[str, ColumnRole]
    task_kind: TaskKind = TaskKind.ADOPTION
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        roles = {str(k): ColumnRole(v) for k, v in self.roles.items()}
        if not roles:
            raise SchemaError("Schema assigns no columns")
        for role in (ColumnRole.FEATURE, ColumnRole.LABEL, ColumnRole.PROTECTED):
            if role not in roles.values():
                raise SchemaError(
                    f"Schema needs at least one {role.value} column", field=role.value
                )

        levels = {}
        for name, declared in self.levels.items():
            if roles.get(name) is not ColumnRole.PROTECTED:
                raise SchemaError(f"Levels declared for non-protected column '{name}'", field=name)
            declared = tuple(str(v) for v in declared)
            if len(set(declared)) != len(declared) or "" in declared:
                raise SchemaError(f"Levels of '{name}' must be distinct and non-empty", field=name)
            levels[name] = tuple(v for v in declared if v != UNSPECIFIED)

        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "levels", levels)

    def columns(self, role: ColumnRole) -> tuple[str, ...]:
        return tuple(name for name, r in self.roles.items() if r is role)

    @property
    def features(self) -> tuple[str, ...]:
        return self.columns(ColumnRole.FEATURE)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.columns(ColumnRole.LABEL)

    @property
    def protected(self) -> tuple[str, ...]:
        return self.columns(ColumnRole.PROTECTED)

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec_version": SPEC_VERSION,
            "task_kind": self.task_kind.value,
            "columns": {name: role.value for name, role in self.roles.items()},
            "levels": {name: list(levels) for name, levels in self.levels.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ColumnSchema":
        version = data.get("spec_version", SPEC_VERSION)
        if version != SPEC_VERSION:
            raise SchemaError(f"Unsupported schema spec_version '{version}'", field="spec_version")
        if "columns" not in data or not isinstance(data["columns"], Mapping):
            raise SchemaError("Schema document needs a 'columns' mapping", field="columns")
        try:
            roles = {str(k): ColumnRole(v) for k, v in data["columns"].items()}
            task_kind = TaskKind(data.get("task_kind", TaskKind.ADOPTION.value))
        except ValueError as e:
            raise SchemaError(f"Invalid schema document: {e}") from e
        levels = {str(k): tuple(v) for k, v in dict(data.get("levels", {})).items()}
        return cls(roles=roles, task_kind=task_kind, levels=levels)

    @classmethod
    def load(cls, path: str | Path) -> "ColumnSchema":
        try:
            data = load_json(path)
        except FileNotFoundError as e:
            raise SchemaError(str(e), field=str(path)) from e
        except ValueError as e:
            raise SchemaError(f"Schema file {path} is not valid JSON: {e}", field=str(path)) from e
        if not isinstance(data, Mapping):
            raise SchemaError("Schema document must be a JSON object", field=str(path))
        return cls.from_dict(data)
