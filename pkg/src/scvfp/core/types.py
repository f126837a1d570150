from __future__ import annotations

from dataclasses import dataclass, field
from typing import List


@dataclass
class ValidationIssue:
    rule_id: str
    message: str
    keywords: List[str] = field(default_factory=list)


@dataclass
class MetricReport:
    mse: float
    psnr: float
    mean_cosine: float
    step_cosines: List[float] = field(default_factory=list)
    windows: int = 0
    persistence_mse: float | None = None
