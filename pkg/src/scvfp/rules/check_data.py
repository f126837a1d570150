from __future__ import annotations

from typing import List

from ..core.config import RunSpec
from ..core.types import ValidationIssue
from ..utils.validation_checks import check_split_ratios, check_stride


def validate_data(spec: RunSpec) -> List[ValidationIssue]:
    return check_stride(spec.data) + check_split_ratios(spec.data)
