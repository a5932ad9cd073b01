"""
Custom exceptions for the package

Every exception carries the process exit code the CLI reports for it:
0 success, 1 usage, 2 validation, 3 numerical failure.
"""
from typing import Optional, Dict, Any, List


class StdmlException(Exception):
    """Base exception for all stdml exceptions"""

    def __init__(
        self,
        message: str,
        exit_code: int = 3,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.error_code = error_code or self.__class__.__name__
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to dictionary for structured reporting"""
        return {
            "error": {
                "message": self.message,
                "code": self.error_code,
                "exit_code": self.exit_code,
                "details": self.details,
            }
        }


class ConfigurationError(StdmlException):
    """Invalid parameters or configuration (exit 1)"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=1,
            error_code="CONFIGURATION_ERROR",
            details=details,
        )


class UsageError(StdmlException):
    """Bad command-line usage (exit 1)"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=1,
            error_code="USAGE_ERROR",
            details=details,
        )


class ValidationError(StdmlException):
    """Data validation error with itemized problems (exit 2)"""

    def __init__(self, message: str, errors: Optional[List[Dict[str, Any]]] = None):
        self.errors = errors or []
        super().__init__(
            message=message,
            exit_code=2,
            error_code="VALIDATION_ERROR",
            details={"errors": self.errors},
        )


class ShapeError(StdmlException):
    """Length or schema mismatch (exit 2)"""

    def __init__(self, message: str, expected: Any = None, actual: Any = None):
        super().__init__(
            message=message,
            exit_code=2,
            error_code="SHAPE_ERROR",
            details={"expected": expected, "actual": actual},
        )


class DomainError(StdmlException):
    """Argument outside a function's domain (exit 2)"""

    def __init__(self, message: str, value: Any = None):
        super().__init__(
            message=message,
            exit_code=2,
            error_code="DOMAIN_ERROR",
            details={"value": value},
        )


class NumericalError(StdmlException):
    """Numerical failure (exit 3)"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=3,
            error_code="NUMERICAL_ERROR",
            details=details,
        )


class SingularityError(StdmlException):
    """Rank-deficient design matrix (exit 3)"""

    def __init__(self, message: str, columns: Optional[List[str]] = None):
        self.columns = columns or []
        super().__init__(
            message=message,
            exit_code=3,
            error_code="SINGULARITY_ERROR",
            details={"collinear_columns": self.columns},
        )


class LearnerError(StdmlException):
    """First-stage learner failure inside a fold (exit 3)"""

    def __init__(self, message: str, fold: Optional[int] = None, target: Optional[str] = None):
        self.fold = fold
        self.target = target
        super().__init__(
            message=message,
            exit_code=3,
            error_code="LEARNER_ERROR",
            details={"fold": fold, "target": target},
        )


class SweepAbortedError(StdmlException):
    """A method failed on too many Monte Carlo replicates (exit 3)"""

    def __init__(self, message: str, failures: Optional[Dict[str, Any]] = None):
        super().__init__(
            message=message,
            exit_code=3,
            error_code="SWEEP_ABORTED",
            details={"failures": failures or {}},
        )
