"""
Error Types - One hierarchy for every rejected input or halted run

Every error carries enough context (shapes, key paths, epochs) to
diagnose the failure without a debugger.
"""

from typing import Optional, Sequence


class EmotionModelError(Exception):
    """Root of all project errors"""


class ShapeMismatchError(EmotionModelError, ValueError):
    """Tensor shape does not match what the layer/cell/network expects"""

    def __init__(self, expected: Sequence[int], actual: Sequence[int], where: str = ""):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        self.where = where
        prefix = f"{where}: " if where else ""
        super().__init__(f"{prefix}expected shape {self.expected}, got {self.actual}")


class StateError(EmotionModelError, RuntimeError):
    """Operation called in the wrong state (e.g. backward before forward)"""


class NonFiniteError(EmotionModelError, ValueError):
    """NaN or Inf found where finite values are required"""

    def __init__(self, what: str, detail: str = ""):
        self.what = what
        message = f"non-finite values in {what}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class EmptyBatchError(EmotionModelError, ValueError):
    """Empty batch, corpus or window"""


class OrderingError(EmotionModelError, ValueError):
    """Records arrived out of time order"""


class ConfigError(EmotionModelError, ValueError):
    """Invalid configuration; `key_path` is the dotted path of the offending key"""

    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class CheckpointError(EmotionModelError, IOError):
    """Checkpoint missing, corrupt, or written by an incompatible format version"""


class RunHaltedError(EmotionModelError, RuntimeError):
    """The interaction loop stopped; `epoch` is where it stopped"""

    def __init__(self, epoch: int, diagnostic: str, cause: Optional[BaseException] = None):
        self.epoch = epoch
        self.diagnostic = diagnostic
        self.cause = cause
        super().__init__(f"run halted at epoch {epoch}: {diagnostic}")


class ReportError(EmotionModelError, ValueError):
    """Analysis inputs missing or malformed"""
