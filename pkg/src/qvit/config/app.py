from __future__ import annotations

import logging
import sys
from typing import TYPE_CHECKING

import structlog

from .base import get_settings

if TYPE_CHECKING:
    from structlog.typing import Processor

__all__ = ("configure_logging", "structlog_processors")


def structlog_processors(as_json: bool) -> list[Processor]:
    """Processor chain shared by every logger in the package.

    Args:
        as_json: Render the final event dictionary as a JSON line.

    Returns:
        The ordered processor list.
    """
    settings = get_settings()
    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.EventRenamer(settings.log.EVENT_KEY),
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        structlog.processors.StackInfoRenderer(),
    ]
    if as_json:
        processors.extend(
            [
                structlog.processors.format_exc_info,
                structlog.processors.JSONRenderer(),
            ]
        )
    else:
        processors.append(structlog.dev.ConsoleRenderer(event_key=settings.log.EVENT_KEY))
    return processors


def configure_logging(level: int | None = None, as_json: bool | None = None) -> None:
    """Configure structlog to write to stderr.

    Standard output is reserved for machine-readable command output.
    """
    settings = get_settings()
    level = settings.log.LEVEL if level is None else level
    as_json = settings.log.JSON if as_json is None else as_json
    structlog.configure(
        processors=structlog_processors(as_json=as_json),
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(message)s")
