"""Exception hierarchy shared across the package.

Two roots matter to callers: ConfigError (bad flags/config, CLI exit 2)
and everything else under GroomerError (runtime failure, CLI exit 3).
Module-specific errors live next to the code that raises them and
subclass GroomerError.
"""
from __future__ import annotations


class GroomerError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GroomerError):
    """Invalid configuration or command-line usage."""


class ProviderError(GroomerError):
    """A remote provider call failed after retries."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 1):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class UnknownIssueKeyError(GroomerError):
    """An issue key was referenced that is absent from the working set."""
