"""
Error hierarchy shared by every app.

Each error class carries the process exit code the CLI maps it to:
- ConfigurationError: 2
- DataError (and ShapeError): 3
- NumericalError: 4
"""

from __future__ import annotations

from typing import Optional


class StochSRError(Exception):
    """
    Base class for all errors raised by this project.
    """

    exit_code = 1


class ConfigurationError(StochSRError):
    """
    Invalid configuration, usage, or missing prerequisite artifact.
    """

    exit_code = 2


class DataError(StochSRError):
    """
    Malformed or truncated data on disk or in memory.
    """

    exit_code = 3

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class ShapeError(DataError, ValueError):
    """
    Tensor shape mismatch.
    """

    def __init__(self, message: str):
        super().__init__(message)


class NumericalError(StochSRError, ArithmeticError):
    """
    Non-finite values where finite ones are required.
    """

    exit_code = 4

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
