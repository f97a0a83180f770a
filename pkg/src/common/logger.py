"""Logging for the gadget-chain miner.

Every module calls ``setup_logger(__name__)``. Console output goes to stderr
so that reports and stage dumps written to stdout stay machine-readable.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from .config import get_config

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
PACKAGE_PREFIX = "src"


def _formatter() -> logging.Formatter:
    return logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)


def _file_handler(log_file: str) -> logging.Handler:
    config = get_config()
    log_dir = Path(config.log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.handlers.RotatingFileHandler(
        log_dir / log_file, maxBytes=config.log_max_bytes, backupCount=config.log_backup_count
    )
    handler.setFormatter(_formatter())
    return handler


def setup_logger(
    name: str, log_file: Optional[str] = None, level: Optional[str] = None
) -> logging.Logger:
    """
    Set up a logger with a stderr handler and, optionally, a rotating file.

    Args:
        name: Logger name (typically __name__)
        log_file: File name inside logging.dir; ignored when TEST_MODE is set
        level: Log level (default from config)

    Returns:
        Configured logger
    """
    config = get_config()
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, (level or config.log_level).upper()))

    if logger.handlers:
        return logger

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(_formatter())
    logger.addHandler(console_handler)

    if log_file and not config.test_mode:
        try:
            logger.addHandler(_file_handler(log_file))
        except OSError as e:
            logger.warning(
                f"Could not create log file {log_file}: {e}. Using console logging only."
            )

    return logger


def set_package_level(level: str) -> None:
    """
    Change the level of every logger created under the src package.

    Args:
        level: Level name such as 'DEBUG' or 'WARNING'
    """
    numeric = getattr(logging, level.upper())
    for name, existing in logging.root.manager.loggerDict.items():
        if name.startswith(PACKAGE_PREFIX) and isinstance(existing, logging.Logger):
            existing.setLevel(numeric)
