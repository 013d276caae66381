"""Logging configuration for kakeyalab."""

import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from loguru import logger

from ..config import settings

CONSOLE_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}"
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {thread.name} | {name}:{function}:{line} | {message}"


def setup_logger(level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """Configure loguru sinks.

    Analyses run on a thread pool, so the file sink is enqueued.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Optional file path for logging; defaults to the `log_file` setting
    """
    logger.remove()

    log_level = (level or settings.get("log_level", "INFO")).upper()
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=log_level, colorize=True)

    target = log_file or settings.get("log_file")
    if target:
        file_path = Path(target)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            file_path,
            format=FILE_FORMAT,
            level=log_level,
            rotation="10 MB",
            retention="7 days",
            enqueue=True,
        )


@contextmanager
def timed(label: str, **context) -> Iterator[None]:
    """Log start and finish of a long-running step at INFO, with elapsed seconds."""
    start = time.perf_counter()
    with logger.contextualize(**context):
        logger.info(f"{label}: started")
        try:
            yield
        finally:
            logger.info(f"{label}: finished in {time.perf_counter() - start:.2f}s")


# Initialize logger on import
setup_logger()
