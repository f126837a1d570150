from .logging_setup import configure_logging
from .log_decorator import log_process

__all__ = ['configure_logging', 'log_process']
