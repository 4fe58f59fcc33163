"""Structured logging for noiselab.

Records go to stderr so CSV/JSON report bodies stay clean. Every record
emitted inside :func:`run_context` carries the command name and seed.
"""

import logging.config
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import structlog
from structlog.stdlib import LoggerFactory
from structlog.typing import EventDict, WrappedLogger

from config.settings import settings

LOG_FILE_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5


def numpy_values(_: WrappedLogger, __: str, event_dict: EventDict) -> EventDict:
    """Turn numpy scalars and small arrays into plain Python values."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            event_dict[key] = value.item()
        elif isinstance(value, np.ndarray):
            event_dict[key] = value.tolist() if value.size <= 16 else f"<array shape={value.shape}>"
    return event_dict


def _processors() -> List[Any]:
    return [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.processors.TimeStamper(fmt="ISO"),
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        numpy_values,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]


def _handlers(level: str, log_file: Optional[str]) -> Dict[str, Dict[str, Any]]:
    handlers: Dict[str, Dict[str, Any]] = {
        "stderr": {
            "level": level,
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "structured",
        }
    }
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers["file"] = {
            "level": level,
            "class": "logging.handlers.RotatingFileHandler",
            "filename": str(path),
            "maxBytes": LOG_FILE_BYTES,
            "backupCount": LOG_FILE_BACKUPS,
            "formatter": "structured",
        }
    return handlers


def configure_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    log_file: Optional[str] = None
) -> None:
    """Wire structlog onto stdlib logging with a JSON or console renderer."""
    level = (log_level or settings.log_level).upper()
    fmt = log_format or settings.log_format
    log_file = log_file or settings.log_file

    renderer: Any
    if fmt == "json":
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=_processors() + [structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handlers = _handlers(level, log_file)
    logging.config.dictConfig({
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "structured": {
                "()": structlog.stdlib.ProcessorFormatter,
                "processor": renderer,
            },
        },
        "handlers": handlers,
        "loggers": {
            "": {"handlers": list(handlers), "level": level, "propagate": True},
            # scipy/numpy warnings routed through logging stay at WARNING
            "py.warnings": {"handlers": list(handlers), "level": "WARNING", "propagate": False},
        },
    })
    logging.captureWarnings(True)


@contextmanager
def run_context(**values: Any) -> Iterator[None]:
    """Bind values (command, seed, ...) to every record logged inside the block."""
    with structlog.contextvars.bound_contextvars(**values):
        yield


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a configured logger instance."""
    return structlog.get_logger(name)


configure_logging()
