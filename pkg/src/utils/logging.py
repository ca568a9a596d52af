import logging
import json
from typing import Any, Dict, Optional
from datetime import datetime, timezone

from .config import config


_managed_loggers: Dict[str, logging.Logger] = {}
_current_level: Optional[int] = None


class StructuredFormatter(logging.Formatter):
    """JSON formatter for structured logging, one object per line."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON, level first."""
        log_data = {
            "level": record.levelname,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "logger": record.name,
            "message": record.getMessage(),
        }

        # Add request_id if present
        if hasattr(record, "request_id"):
            log_data["request_id"] = record.request_id

        # Add execution_time_ms if present
        if hasattr(record, "execution_time_ms"):
            log_data["execution_time_ms"] = record.execution_time_ms

        # Add any extra fields
        if hasattr(record, "extra_fields"):
            log_data.update(record.extra_fields)

        # Add exception info if present
        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def get_logger(name: str) -> logging.Logger:
    """
    Get a configured logger instance with structured JSON formatting.

    Args:
        name: Logger name (usually __name__)

    Returns:
        Configured logger writing JSON lines to stderr
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = StructuredFormatter()
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.propagate = False
        logger.setLevel(_current_level if _current_level is not None else config.log_level)

    _managed_loggers[name] = logger
    return logger


def set_verbosity(level: int) -> None:
    """
    Re-level every logger handed out by get_logger.

    Args:
        level: A logging level such as logging.WARNING
    """
    global _current_level
    _current_level = level
    for logger in _managed_loggers.values():
        logger.setLevel(level)


def log_step(logger: logging.Logger, step: str, params: Dict[str, Any]) -> None:
    """
    Log the start of a pipeline step with its parameters.

    Args:
        logger: Logger instance
        step: Step name (e.g. "fuse-depth")
        params: Step parameters
    """
    logger.info(
        f"Step started: {step}",
        extra={"extra_fields": {"step": step, "params": params}}
    )


def log_step_result(logger: logging.Logger, step: str, success: bool, **fields: Any) -> None:
    """
    Log the outcome of a pipeline step.

    Args:
        logger: Logger instance
        step: Step name
        success: Whether the step succeeded
        **fields: Result figures worth keeping in the log
    """
    status = "success" if success else "failed"
    log = logger.info if success else logger.error
    log(
        f"Step {status}: {step}",
        extra={"extra_fields": {"step": step, "success": success, **fields}}
    )
