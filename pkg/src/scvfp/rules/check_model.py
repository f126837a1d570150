from __future__ import annotations

from typing import List

from ..core.config import RunSpec
from ..core.types import ValidationIssue
from ..utils.validation_checks import (
    check_head_split,
    check_model_extents,
    check_positional_width,
    check_precision,
    check_ssl_weight,
    check_variant,
)


def validate_model(spec: RunSpec) -> List[ValidationIssue]:
    """Architecture checks on the model section."""
    cfg = spec.model
    issues: List[ValidationIssue] = []
    issues.extend(check_model_extents(cfg))
    issues.extend(check_variant(cfg))
    issues.extend(check_head_split(cfg))
    issues.extend(check_positional_width(cfg))
    issues.extend(check_ssl_weight(cfg))
    issues.extend(check_precision(cfg))
    return issues
