from __future__ import annotations

import importlib
import logging
import pkgutil
from typing import TYPE_CHECKING, Callable, List

from .types import ValidationIssue

if TYPE_CHECKING:
    from .config import RunSpec

logger = logging.getLogger(__name__)

_DEF_PKG = "scvfp.rules"
RuleFn = Callable[["RunSpec"], List[ValidationIssue]]


def load_rules() -> List[RuleFn]:
    """Load every ``validate_*`` function from the rules package, in module order."""
    rules: List[RuleFn] = []
    pkg = importlib.import_module(_DEF_PKG)

    for m in sorted(pkgutil.iter_modules(pkg.__path__, prefix=f"{_DEF_PKG}."), key=lambda m: m.name):
        module = importlib.import_module(m.name)
        for attr_name in sorted(dir(module)):
            attr = getattr(module, attr_name)
            if callable(attr) and attr_name.startswith("validate_"):
                rules.append(attr)

    return rules


def run_rules(spec: "RunSpec") -> List[ValidationIssue]:
    issues: List[ValidationIssue] = []
    for rule in load_rules():
        try:
            issues.extend(rule(spec))
        except Exception as rule_exc:
            logger.exception("Rule %s error", rule.__qualname__)
            issues.append(ValidationIssue(
                rule_id=f"{rule.__qualname__}.error",
                message=str(rule_exc),
                keywords=["error"],
            ))
    return issues
