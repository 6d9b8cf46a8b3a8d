"""
Structured Logging Formatter

Renders structlog event dicts as JSON lines or colored console text.
"""

from datetime import datetime, timezone
from typing import Any, Dict

import structlog

SERVICE_NAME = "toffe"


class StructuredFormatter(structlog.processors.JSONRenderer):
    """JSON log formatter"""

    def __init__(self, **kwargs: Any):
        kwargs.setdefault("sort_keys", True)
        super().__init__(**kwargs)

    def __call__(self, logger: Any, name: str, event_dict: Dict[str, Any]) -> str:
        if "timestamp" not in event_dict:
            event_dict["timestamp"] = datetime.now(timezone.utc).isoformat()

        if "level" not in event_dict:
            event_dict["level"] = name.lower()

        if "service" not in event_dict:
            event_dict["service"] = SERVICE_NAME

        return super().__call__(logger, name, event_dict)


class HumanReadableFormatter(structlog.dev.ConsoleRenderer):
    """Human-readable log formatter, used when logging.json is false"""

    def __init__(self, colors: bool = True):
        super().__init__(colors=colors)
