"""
Loguru sinks: one console sink for the process, one run.log per output directory
"""
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"
RUN_LOG_NAME = "run.log"


def setup_logger(
    level: str = "INFO",
    log_file: Optional[str] = None,
    rotation: str = "10 MB",
    retention: str = "7 days"
) -> None:
    """
    Reset loguru to a colorized stderr sink at level.

    Args:
        level: DEBUG, INFO, SUCCESS, WARNING, ERROR or CRITICAL
        log_file: extra rotating log (the CLI's --log-file); run.log is handled by run_log()
        rotation: size at which log_file rotates
        retention: how long rotated copies of log_file are kept
    """
    logger.remove()
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)
    if log_file:
        logger.add(log_file, format=FILE_FORMAT, level=level, rotation=rotation,
                   retention=retention, encoding="utf-8")


@contextmanager
def run_log(out_dir: Union[str, Path], level: str = "INFO") -> Iterator[Path]:
    """
    Copy every record into <out_dir>/run.log while the block runs.

    The file is appended to, so stages run one command at a time share a
    single log. The sink is removed on exit even when the block raises.
    """
    path = Path(out_dir) / RUN_LOG_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    sink = logger.add(str(path), format=FILE_FORMAT, level=level, encoding="utf-8")
    try:
        yield path
    finally:
        logger.remove(sink)


setup_logger()

__all__ = ["logger", "setup_logger", "run_log"]
