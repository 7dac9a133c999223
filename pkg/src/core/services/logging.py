"""
Logging service for EntLaser
"""

import logging
import sys
from pathlib import Path
from typing import Any, List, Optional, Union

import structlog

_HANDLER_TAG = "_entlaser_handler"


class LoggingService:
    """Structured logging service"""

    def __init__(
        self,
        log_dir: Optional[Union[str, Path]] = None,
        level: Union[int, str] = logging.INFO,
    ):
        self.log_dir = Path(log_dir) if log_dir is not None else None
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self.level = logging.getLevelName(level) if isinstance(level, str) else level

        # Configure structlog
        structlog.configure(
            processors=[
                structlog.stdlib.filter_by_level,
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.stdlib.PositionalArgumentsFormatter(),
                structlog.processors.TimeStamper(fmt="iso"),
                structlog.processors.StackInfoRenderer(),
                structlog.processors.format_exc_info,
                structlog.processors.UnicodeDecoder(),
                structlog.processors.JSONRenderer(),
            ],
            context_class=dict,
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=True,
        )

        self._setup_handlers()

    @staticmethod
    def _file_handler(path: Path, level: int) -> logging.Handler:
        handler = logging.FileHandler(path, encoding="utf-8")
        handler.setLevel(level)
        return handler

    def _setup_handlers(self):
        """Swap our handlers on the root logger, leaving foreign ones alone"""
        root_logger = logging.getLogger()
        for handler in list(root_logger.handlers):
            if getattr(handler, _HANDLER_TAG, False):
                root_logger.removeHandler(handler)
                handler.close()

        # stdout carries CSV and reports, so the console goes to stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(self.level)
        handlers: List[logging.Handler] = [console_handler]
        if self.log_dir is not None:
            log_dir = self.log_dir
            handlers.append(self._file_handler(log_dir / "entlaser.log", logging.DEBUG))
            handlers.append(self._file_handler(log_dir / "errors.log", logging.WARNING))

        root_logger.setLevel(min(logging.DEBUG, self.level))
        for handler in handlers:
            handler.setFormatter(logging.Formatter("%(message)s"))
            setattr(handler, _HANDLER_TAG, True)
            root_logger.addHandler(handler)

    def get_logger(self, name: str) -> structlog.BoundLogger:
        """Get a structured logger"""
        return structlog.get_logger(name)

    def log_event(
        self,
        logger_name: str,
        level: str,
        event_type: str,
        **kwargs: Any,
    ):
        """Log a structured event"""
        logger = self.get_logger(logger_name)
        level_method = getattr(logger, level.lower(), logger.info)
        level_method(event_type, **kwargs)

    def log_run(
        self,
        operation: str,
        t_end: float,
        steps: int,
        duration_ms: Optional[int] = None,
        **kwargs: Any,
    ):
        """Log an evolution or sweep run"""
        self.log_event(
            "run",
            "INFO",
            f"run.{operation}",
            t_end=t_end,
            steps=steps,
            duration_ms=duration_ms,
            **kwargs,
        )

    def log_property(
        self,
        suite: str,
        name: str,
        deviation: float,
        tolerance: float,
        passed: bool,
        **kwargs: Any,
    ):
        """Log an oracle-check property result"""
        self.log_event(
            "oracle",
            "INFO" if passed else "WARNING",
            f"oracle.{suite}.{name}",
            deviation=deviation,
            tolerance=tolerance,
            passed=passed,
            **kwargs,
        )

    def log_error(self, error_type: str, error_message: str, **kwargs: Any):
        """Log error event"""
        self.log_event(
            "error",
            "ERROR",
            f"error.{error_type}",
            error_message=error_message,
            **kwargs,
        )

    def log_performance(self, operation: str, duration_ms: int, **kwargs: Any):
        """Log performance metric"""
        self.log_event(
            "performance",
            "INFO",
            f"performance.{operation}",
            duration_ms=duration_ms,
            **kwargs,
        )


# Global logging service instance
_logging_service: Optional[LoggingService] = None


def configure_logging(
    log_dir: Optional[Union[str, Path]] = None,
    level: Union[int, str] = logging.INFO,
) -> LoggingService:
    """Replace the global logging service with an explicitly configured one"""
    global _logging_service
    _logging_service = LoggingService(log_dir=log_dir, level=level)
    return _logging_service


def get_logging_service() -> LoggingService:
    """Get the global logging service instance"""
    global _logging_service
    if _logging_service is None:
        _logging_service = LoggingService()
    return _logging_service


def get_logger(name: str) -> structlog.BoundLogger:
    """Get a logger instance"""
    return get_logging_service().get_logger(name)
