"""
Structured Logging - key=value log lines on top of the stdlib logging module

Usage:
    logger = get_logger(__name__)
    log_event(logger, "lstm_update", epoch=100, loss=0.012)
    -> "lstm_update epoch=100 loss=0.012"
"""

import logging
from pathlib import Path
from typing import Any, Optional, Union

ROOT_LOGGER_NAME = "emotion"
LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s | %(message)s"


def get_logger(name: str) -> logging.Logger:
    """Logger under the project root so one call configures every module"""
    if name.startswith(ROOT_LOGGER_NAME):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    text = str(value)
    return f'"{text}"' if " " in text else text


def format_event(event: str, **fields: Any) -> str:
    parts = [event]
    parts.extend(f"{key}={_format_value(value)}" for key, value in fields.items())
    return " ".join(parts)


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields: Any) -> None:
    """Emit one structured event line"""
    if logger.isEnabledFor(level):
        logger.log(level, format_event(event, **fields))


def configure_logging(
    level: Union[int, str] = logging.INFO,
    log_file: Optional[Union[str, Path]] = None,
) -> logging.Logger:
    """
    Install handlers on the project root logger

    Calling this again replaces the previous handlers, so the CLI can
    re-point the file handler at each new run directory.
    """
    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    root.propagate = False
    return root
