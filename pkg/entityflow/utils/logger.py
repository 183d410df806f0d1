"""Logging setup for entityflow.

The CLI builds a ``LoggingConfig`` from ``--verbose/--quiet/--log-file`` and
hands it to ``setup_logger``; library modules only call ``get_logger``.
"""

import logging
import sys
from typing import Optional

from entityflow.config import LoggingConfig

PACKAGE_LOGGER = "entityflow"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logger(config: Optional[LoggingConfig] = None) -> logging.Logger:
    """
    Configure the package logger from a ``LoggingConfig``.

    Handlers from an earlier call are replaced, so repeated CLI invocations in
    one process do not duplicate output.

    Args:
        config: Level, optional log file and console switch; defaults to INFO on stdout

    Returns:
        The ``entityflow`` logger

    Example:
        >>> logger = setup_logger(LoggingConfig.from_flags(verbose=True))
        >>> logger.level == logging.DEBUG
        True
    """
    config = config or LoggingConfig()
    level = logging.getLevelName(config.level)
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)
    handlers = []
    if config.log_to_console:
        handlers.append(logging.StreamHandler(sys.stdout))
    if config.log_file:
        config.log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(config.log_file, encoding="utf-8"))
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """Logger for a module, normally called with ``__name__``."""
    return logging.getLogger(name)
