"""Structured JSON log formatter for kellysortino."""

import json
import logging
import logging.config
from datetime import datetime, timezone


class JsonFormatter(logging.Formatter):
    """Emit each log record as a single-line JSON object.

    Standard fields:
        ts        ISO-8601 UTC timestamp
        level     DEBUG / INFO / WARNING / ERROR / CRITICAL
        logger    logger name
        msg       formatted message
        exc       exception traceback (only when an exception is present)

    Any keys passed via ``extra=`` are merged into the top-level object.
    """

    def format(self, record: logging.LogRecord) -> str:
        payload: dict = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "msg": record.getMessage(),
        }

        skip = logging.LogRecord("", 0, "", 0, "", None, None).__dict__.keys() | {
            "message", "asctime", "args", "exc_info", "exc_text", "stack_info",
        }
        for key, value in record.__dict__.items():
            if key not in skip and not key.startswith("_"):
                payload[key] = value

        if record.exc_info:
            payload["exc"] = self.formatException(record.exc_info)

        return json.dumps(payload, default=str)


def build_logging_config(level: str = "INFO", json_output: bool = True) -> dict:
    """dictConfig payload; handlers write to stderr so stdout carries results only."""
    formatter = (
        {"()": "kellysortino.logging_setup.JsonFormatter"}
        if json_output
        else {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"}
    )
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {"default": formatter},
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "formatter": "default",
                "stream": "ext://sys.stderr",
            },
        },
        "root": {
            "level": level.upper(),
            "handlers": ["console"],
        },
    }


def configure_logging(level: str = "INFO", json_output: bool = True) -> None:
    logging.config.dictConfig(build_logging_config(level, json_output))
