"""Core modules: settings, constants, exceptions, error handling"""
from stdml.core.config import settings
from stdml.core.exceptions import StdmlException

__all__ = [
    "settings",
    "StdmlException",
]
