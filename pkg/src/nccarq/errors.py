"""Exception types raised across the package.

Each error also derives from the builtin exception a caller would expect, so
``except ValueError`` keeps working for parameter and configuration problems.

"""

from __future__ import annotations

from typing import Any, Optional, Sequence


class NccArqError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(NccArqError, ValueError):
    """A parameter lies outside its documented domain."""


class LengthMismatchError(NccArqError, ValueError):
    """Two payloads that must be XOR-ed have different lengths."""


class NotDecodableError(NccArqError, ValueError):
    """A coded payload cannot be decoded with the payload supplied."""


class UndefinedMetricError(NccArqError, ValueError):
    """A metric was requested from too few samples."""


class ConfigurationError(NccArqError, ValueError):
    """A scenario configuration or channel setup is invalid."""

    key: Optional[str]
    line: Optional[int]

    def __init__(
        self, message: str, key: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line


class SimulationAbort(NccArqError, RuntimeError):
    """A simulation run stopped before completing all of its cycles.

    The engine attaches the trace recorded up to the failure.
    """

    trace: Sequence[Any]

    def __init__(self, message: str, trace: Optional[Sequence[Any]] = None) -> None:
        super().__init__(message)
        self.trace = list(trace) if trace else []


class ProtocolViolationError(SimulationAbort):
    """A node reached a state the protocol does not allow."""


class MaxAttemptsExceededError(SimulationAbort):
    """The relay exceeded the maximum number of attempts in one cycle."""
