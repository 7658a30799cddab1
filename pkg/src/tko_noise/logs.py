"""Logging setup: one stderr handler with the [tko-noise] prefix."""

import logging
import sys
from typing import Optional

from tko_noise.config import get_log_level

LOGGER_NAME = "tko_noise"


def get_logger(name: str) -> logging.Logger:
    """Child logger of the package logger, e.g. get_logger("quadform")."""
    return logging.getLogger(f"{LOGGER_NAME}.{name}")


def setup_logging(level: Optional[str] = None) -> logging.Logger:
    """Install the stderr handler once and set the level (TKO_LOG_LEVEL by default)."""
    logger = logging.getLogger(LOGGER_NAME)
    if not any(getattr(h, "_tko_handler", False) for h in logger.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("[tko-noise] %(message)s"))
        handler._tko_handler = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
    logger.setLevel(level or get_log_level())
    logger.propagate = False
    return logger
