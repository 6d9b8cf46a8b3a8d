"""
Logging Module

Structured logging for the whole pipeline: simulation, training, inference
and evaluation all log through here.
"""

import logging
import sys
from typing import Any, Dict

import structlog

from .formatter import HumanReadableFormatter, StructuredFormatter

logger = structlog.get_logger(__name__)


def setup_logging(log_level: str = "INFO", json_format: bool = True) -> None:
    """
    Setup structured logging

    Args:
        log_level: Logging level name (DEBUG, INFO, ...)
        json_format: Render JSON lines instead of console text
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    renderer = StructuredFormatter() if json_format else HumanReadableFormatter()

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            renderer,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers = []

    handler = logging.StreamHandler(sys.stdout)
    handler.setLevel(level)
    root_logger.addHandler(handler)

    structlog.get_logger().info("Logging configured", level=log_level.upper(), json_format=json_format)


class get_logger:
    """
    Module-scoped logger carrying optional bound context

    Usage:
        from modules.logger import get_logger
        logger = get_logger(__name__)
        log = logger.bind(bin=3)
        log.info("Trained OFS", final_loss=0.12)
    """

    def __init__(self, name: str, **context: Any):
        self._name = name
        self._context: Dict[str, Any] = context

    def bind(self, **context: Any) -> "get_logger":
        """Copy with extra keys added to every event"""
        return get_logger(self._name, **{**self._context, **context})

    def _emit(self, level: str, message: str, kwargs: Dict[str, Any]) -> None:
        getattr(logger, level)(message, module=self._name, **{**self._context, **kwargs})

    def debug(self, message: str, **kwargs: Any) -> None:
        self._emit("debug", message, kwargs)

    def info(self, message: str, **kwargs: Any) -> None:
        self._emit("info", message, kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self._emit("warning", message, kwargs)

    def error(self, message: str, **kwargs: Any) -> None:
        self._emit("error", message, kwargs)

    def critical(self, message: str, **kwargs: Any) -> None:
        self._emit("critical", message, kwargs)


__all__ = ["setup_logging", "get_logger"]
