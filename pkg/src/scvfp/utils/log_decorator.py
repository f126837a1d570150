from __future__ import annotations

import functools
import logging
import time
from typing import Any, Callable, TypeVar, cast

F = TypeVar("F", bound=Callable[..., Any])


def log_process(name: str | None = None, level: int = logging.INFO) -> Callable[[F], F]:
    """Log start, finish and elapsed time of the wrapped call on its module's logger."""

    def decorator(func: F) -> F:
        label = name or func.__qualname__
        log = logging.getLogger(func.__module__)

        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            log.log(level, "%s started", label)
            start = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception:
                log.error("%s failed after %.2fs", label, time.perf_counter() - start)
                raise
            log.log(level, "%s finished in %.2fs", label, time.perf_counter() - start)
            return result

        return cast(F, wrapper)

    return decorator
