"""
Global error handling for the command-line entry point
"""
import logging
import sys
from typing import TextIO

from pydantic import ValidationError as PydanticValidationError

from stdml.core.exceptions import StdmlException, ValidationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def stdml_exception_handler(exc: StdmlException, stream: TextIO) -> int:
    """Handle package exceptions"""
    logger.error(
        f"StdmlException: {exc.error_code} - {exc.message}",
        extra={
            "error_code": exc.error_code,
            "exit_code": exc.exit_code,
            "details": exc.details,
        },
    )
    print(f"error: {exc.message}", file=stream)
    if isinstance(exc, ValidationError):
        for item in exc.errors:
            line = item.get("line")
            prefix = f"  line {line}: " if line is not None else "  "
            print(f"{prefix}{item.get('message')}", file=stream)
    return exc.exit_code


def validation_exception_handler(exc: PydanticValidationError, stream: TextIO) -> int:
    """Handle pydantic validation errors raised while resolving configuration"""
    errors = []
    for error in exc.errors():
        field = ".".join(str(loc) for loc in error.get("loc", []))
        errors.append({
            "field": field,
            "message": error.get("msg"),
            "type": error.get("type"),
        })

    logger.warning(
        f"Configuration validation error: {len(errors)} errors",
        extra={"errors": errors},
    )
    print("error: invalid configuration", file=stream)
    for item in errors:
        print(f"  {item['field']}: {item['message']}", file=stream)
    return EXIT_USAGE


def general_exception_handler(exc: Exception, stream: TextIO) -> int:
    """Handle all other exceptions"""
    logger.exception(
        f"Unhandled exception: {type(exc).__name__} - {str(exc)}",
        extra={"exception_type": type(exc).__name__},
    )
    print(f"error: unexpected failure ({type(exc).__name__}: {exc})", file=stream)
    return EXIT_NUMERICAL


def handle_exception(exc: Exception, stream: TextIO = sys.stderr) -> int:
    """Route an exception to its handler and return the process exit code"""
    if isinstance(exc, StdmlException):
        return stdml_exception_handler(exc, stream)
    if isinstance(exc, PydanticValidationError):
        return validation_exception_handler(exc, stream)
    return general_exception_handler(exc, stream)
