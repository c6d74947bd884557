"""Root logger setup for simulation runs: text or JSON lines, on stderr and/or a rotating file."""

import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from pythonjsonlogger import jsonlogger

JSON_FIELDS = '%(timestamp)s %(level)s %(logger)s %(message)s'
TEXT_FORMAT = '%(asctime)s [%(levelname)-5.5s] [%(name)s] %(message)s'


class ContextFilter(logging.Filter):
    """Stamp run context (command, seed) onto every log record."""

    def __init__(self, context: Optional[Mapping[str, object]] = None):
        super().__init__()
        self.context: Dict[str, object] = dict(context or {})

    def filter(self, record: logging.LogRecord) -> bool:
        record.__dict__.update(self.context)
        return True


class SimulationJsonFormatter(jsonlogger.JsonFormatter):
    """JSON formatter that always carries timestamp, level and logger."""

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        # fields named in the format but absent from the record arrive as None
        defaults = {
            'timestamp': lambda: self.formatTime(record, self.datefmt),
            'level': lambda: record.levelname,
            'logger': lambda: record.name,
        }
        for field, value in defaults.items():
            if not log_record.get(field):
                log_record[field] = value()
        if record.exc_info and 'exc_info' not in log_record:
            log_record['exc_info'] = self.formatException(record.exc_info)


def build_formatter(format_type: str) -> logging.Formatter:
    """Formatter for ``standard`` or ``json`` output."""
    if format_type == 'json':
        return SimulationJsonFormatter(JSON_FIELDS)
    return logging.Formatter(fmt=TEXT_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')


def _rotating_file(path: Path, max_bytes: int, backup_count: int) -> Optional[logging.Handler]:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return logging.handlers.RotatingFileHandler(
            filename=str(path), maxBytes=max_bytes, backupCount=backup_count, encoding='utf-8'
        )
    except OSError as e:
        logging.getLogger(__name__).error(f"Cannot open log file {path}: {e}")
        return None


def setup_logging(
    level: str = 'WARNING',
    format_type: str = 'standard',
    log_file: Optional[Path] = None,
    console: bool = True,
    max_bytes: int = 10 * 1024 * 1024,
    backup_count: int = 5,
    context: Optional[Mapping[str, object]] = None,
) -> None:
    """Replace the root logger's handlers for one run.

    Console output goes to stderr; stdout carries command output only.

    Args:
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        format_type: standard or json
        log_file: Optional rotating log file
        console: Whether to log to stderr
        max_bytes: Size at which the log file rotates
        backup_count: Rotated files kept
        context: Run context added to every record
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        numeric_level = logging.WARNING

    root = logging.getLogger()
    root.setLevel(numeric_level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    handlers: List[logging.Handler] = []
    if console:
        handlers.append(logging.StreamHandler(sys.stderr))
    if log_file:
        file_handler = _rotating_file(log_file, max_bytes, backup_count)
        if file_handler is not None:
            handlers.append(file_handler)

    formatter = build_formatter(format_type)
    # per handler, so records propagated from child loggers are stamped too
    context_filter = ContextFilter(context) if context else None
    for handler in handlers:
        handler.setLevel(numeric_level)
        handler.setFormatter(formatter)
        if context_filter is not None:
            handler.addFilter(context_filter)
        root.addHandler(handler)

    root.debug(f"Logging configured: level={level}, format={format_type}, console={console}, file={log_file}")
