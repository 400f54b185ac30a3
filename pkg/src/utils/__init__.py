"""
Utilities - Shared error types and structured logging
"""

from .errors import (
    EmotionModelError,
    ShapeMismatchError,
    StateError,
    NonFiniteError,
    EmptyBatchError,
    OrderingError,
    ConfigError,
    CheckpointError,
    RunHaltedError,
    ReportError,
)
from .logging import get_logger, configure_logging, log_event

__all__ = [
    'EmotionModelError',
    'ShapeMismatchError',
    'StateError',
    'NonFiniteError',
    'EmptyBatchError',
    'OrderingError',
    'ConfigError',
    'CheckpointError',
    'RunHaltedError',
    'ReportError',
    'get_logger',
    'configure_logging',
    'log_event',
]
