from __future__ import annotations


class CalderonError(Exception):
    """Base class for every failure raised by the toolkit."""


class ConfigError(CalderonError, ValueError):
    """Raised when a run document or an argument is invalid (CLI exit code 2)."""


class NumericalError(CalderonError, RuntimeError):
    """Raised when a numerical stage cannot produce a trustworthy result (CLI exit code 3)."""
