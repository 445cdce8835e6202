"""
Loguru sink configuration shared by the CLI and the benchmark harness
"""
import sys
from typing import Optional

from loguru import logger


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """
    Replace loguru's default sink with the configured ones

    Args:
        level: Minimum level for the stderr sink
        log_file: Optional path of an additional file sink (always DEBUG)
    """
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - {message}",
    )
    if log_file:
        logger.add(log_file, level="DEBUG", rotation="10 MB", enqueue=True)
    logger.debug(f"Logging configured: level={level}, file={log_file}")
