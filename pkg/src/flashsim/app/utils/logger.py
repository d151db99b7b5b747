"""
Logging utilities for FlashSim
"""
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from ..config import current_config

LOG_MAX_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 5

# third-party loggers that are noisy at INFO
QUIET_LOGGERS = ('numba', 'galois', 'matplotlib')


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    """
    Configure the root logger for one CLI run.

    Records go to stderr and to a rotating log file. Calling this again
    (one call per command, or per test) replaces the previous handlers.
    """
    level_name = (level or current_config.LOG_LEVEL).upper()
    log_level = getattr(logging, level_name, logging.INFO)
    log_file = Path(log_file or current_config.LOG_FILE)
    log_file.parent.mkdir(parents=True, exist_ok=True)

    root = logging.getLogger()
    root.setLevel(log_level)
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(log_level)
    console_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
    root.addHandler(console_handler)

    file_handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=LOG_MAX_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8"
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(logging.Formatter(current_config.LOG_FORMAT))
    root.addHandler(file_handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    root.debug(f"Logging initialized at {level_name}, file {log_file}")
