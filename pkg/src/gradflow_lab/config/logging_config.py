"""Logging configuration for the laboratory."""

import logging
import logging.config
import sys
from pathlib import Path
from typing import Any, Dict

PACKAGE_LOGGER = "gradflow_lab"
LOG_FILE_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5

# numerical libraries only surface warnings; run progress belongs to the package logger
QUIET_LOGGERS = ("scipy", "numpy", "asyncio")

TEXT_FORMAT = "%(asctime)s %(levelname)-7s [%(name)s:%(lineno)d] %(message)s"
JSON_FIELDS = "%(asctime)s %(name)s %(levelname)s %(module)s %(funcName)s %(message)s"


def _rotating_file(path: Path, level: str, formatter: str) -> Dict[str, Any]:
    return {
        "class": "logging.handlers.RotatingFileHandler",
        "level": level,
        "formatter": formatter,
        "filename": str(path),
        "maxBytes": LOG_FILE_BYTES,
        "backupCount": LOG_FILE_BACKUPS,
        "encoding": "utf8",
    }


def setup_logging(
    log_level: str = "INFO",
    log_file: str = "gradflow_lab.log",
    log_dir: str = "logs",
    json_logs: bool = True,
) -> None:
    """Configure console and rotating file logging for a command.

    Console output goes to stderr so tables printed on stdout stay machine-readable.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Log file name inside ``log_dir``
        log_dir: Log directory, created when missing
        json_logs: Write JSON lines instead of text to the log files
    """
    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)
    file_format = "json" if json_logs else "text"

    config: Dict[str, Any] = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "text": {"format": TEXT_FORMAT, "datefmt": "%Y-%m-%d %H:%M:%S"},
            "console": {"format": "%(levelname)s %(name)s: %(message)s"},
            "json": {"format": JSON_FIELDS, "class": "pythonjsonlogger.jsonlogger.JsonFormatter"},
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": log_level,
                "formatter": "console",
                "stream": sys.stderr,
            },
            "file": _rotating_file(log_path / log_file, log_level, file_format),
            "error_file": _rotating_file(log_path / "error.log", "ERROR", file_format),
        },
        "loggers": {
            PACKAGE_LOGGER: {
                "level": log_level,
                "handlers": ["console", "file", "error_file"],
                "propagate": False,
            },
            **{
                name: {"level": "WARNING", "handlers": ["console", "file"], "propagate": False}
                for name in QUIET_LOGGERS
            },
        },
        "root": {"level": log_level, "handlers": ["console", "file"]},
    }

    logging.config.dictConfig(config)


def get_logger(name: str) -> logging.Logger:
    """Logger for a module; pass ``__name__``."""
    return logging.getLogger(name)
