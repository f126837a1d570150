from __future__ import annotations

from typing import List

from ..core.config import RunSpec
from ..core.types import ValidationIssue
from ..utils.validation_checks import check_optimizer, check_schedule


def validate_train(spec: RunSpec) -> List[ValidationIssue]:
    """Optimizer and loop settings."""
    return check_optimizer(spec.train) + check_schedule(spec.train)
