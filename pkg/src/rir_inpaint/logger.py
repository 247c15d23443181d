"""
Centralized logging configuration for RIR reconstruction experiments.
"""

import logging
import logging.handlers
import os
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

PACKAGE_LOGGER = "rir_inpaint"


def setup_logger(
    name: str = PACKAGE_LOGGER,
    log_dir: Optional[Union[str, Path]] = "logs",
    log_level: int = logging.INFO,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
) -> logging.Logger:
    """
    Set up centralized logging with file rotation and console output.

    Args:
        name: Logger name
        log_dir: Directory for log files, or None for console output only
        log_level: Logging level
        max_bytes: Maximum size per log file
        backup_count: Number of backup files to keep

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(log_level)

    file_handlers = [h for h in logger.handlers if isinstance(h, logging.handlers.RotatingFileHandler)]
    has_console = any(
        type(h) is logging.StreamHandler for h in logger.handlers
    )

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )

    if log_dir is not None:
        log_path = Path(log_dir)
        log_filename = log_path / f"rir_inpaint_{datetime.now().strftime('%Y%m%d')}.log"
        # one run directory at a time
        for handler in file_handlers:
            if handler.baseFilename != os.path.abspath(log_filename):
                logger.removeHandler(handler)
                handler.close()
        file_handlers = [h for h in file_handlers if h in logger.handlers]

    if log_dir is not None and not file_handlers:
        log_path.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            filename=log_filename,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)
        logger.info(f"Logger initialized - Log file: {log_filename}")

    if not has_console:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)

    return logger


def get_logger(name: str = PACKAGE_LOGGER) -> logging.Logger:
    """
    Get a module logger below the package logger.

    The package logger is configured for console output on first use;
    `setup_logger` adds the rotating file handler when a run directory
    is known.

    Args:
        name: Module name, e.g. "diffusion"

    Returns:
        Logger instance
    """
    package = logging.getLogger(PACKAGE_LOGGER)
    if not package.handlers:
        setup_logger(PACKAGE_LOGGER, log_dir=None)
    if name == PACKAGE_LOGGER or name.startswith(PACKAGE_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")
