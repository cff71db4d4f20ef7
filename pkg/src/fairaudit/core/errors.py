"""
Exception hierarchy for fairaudit.

Every error raised on purpose by the package derives from AuditError, which
carries a human-readable message and, where it makes sense, the name of the
offending column, attribute, label or cell so callers (and the CLI's
structured error output) can point at it.
"""

from collections.abc import Sequence


class AuditError(Exception):
    """Base class for all fairaudit errors."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
        self.message = message


class SchemaError(AuditError):
    """Raised when a CSV file or its column-role schema cannot be used."""


class DataValidationError(AuditError):
    """Raised when a Dataset would violate its invariants."""


class ConfigError(AuditError):
    """Raised when a configuration document or object is invalid."""


class ShapeMismatchError(AuditError):
    """Raised when array dimensions disagree."""


class LearnerError(AuditError):
    """Raised when a learner cannot be fitted; carries the label index if any."""

    def __init__(self, message: str, field: str | None = None, label: int | None = None):
        super().__init__(message, field)
        self.label = label


class RankDeficiencyError(AuditError):
    """Raised when a least-squares design does not have full column rank."""

    def __init__(
        self,
        message: str,
        columns: Sequence[str],
        blocks: Sequence[str] | None = None,
    ):
        super().__init__(message, field=",".join(columns))
        self.columns = tuple(columns)
        self.blocks = tuple(blocks) if blocks is not None else ()


class UndefinedCellError(AuditError):
    """Raised when an operation needs metric cells that are undefined."""

    def __init__(self, message: str, cells: Sequence[tuple[str, str]] = ()):
        super().__init__(message, field=";".join(f"{a}/{b}" for a, b in cells) or None)
        self.cells = tuple(cells)


class InsufficientGroupsError(AuditError):
    """Raised when fewer than two usable groups remain for a comparison."""


class TensorMismatchError(AuditError):
    """Raised when two fairness tensors cannot be compared."""
