from __future__ import annotations

from typing import Any, List

from .types import ValidationIssue


class ScvfpError(Exception):
    """Base class for every error raised by the package."""


class TensorError(ScvfpError, ValueError):
    pass


class ShapeError(TensorError):
    pass


class NonFiniteError(TensorError):
    pass


class UndefinedMetricError(ScvfpError, ValueError):
    pass


class FormatError(ScvfpError):
    """Malformed ESEQ1 or checkpoint bytes."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class TrailingDataError(FormatError):
    pass


class DataMismatchError(ScvfpError):
    pass


class ConfigError(ScvfpError):
    def __init__(self, issues: List[ValidationIssue]) -> None:
        self.issues = issues
        lines = "; ".join(f"[{issue.rule_id}] {issue.message}" for issue in issues)
        super().__init__(f"Invalid run spec: {lines}")


class TrainingDivergedError(ScvfpError):
    def __init__(self, epoch: int, batch: int, terms: dict[str, Any]) -> None:
        self.epoch = epoch
        self.batch = batch
        self.terms = terms
        rendered = ", ".join(f"{k}={v}" for k, v in terms.items())
        super().__init__(f"Non-finite loss at epoch {epoch}, batch {batch}: {rendered}")


class EmptyDatasetError(ScvfpError, ValueError):
    """A split or evaluation was asked to work on zero windows."""
