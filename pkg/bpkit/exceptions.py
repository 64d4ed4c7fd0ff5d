"""Typed errors raised by the toolkit.

Each error carries the exit code the command-line front end reports for it,
so library code never decides how the process ends.
"""
from typing import Optional

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IMPOSSIBLE_EVIDENCE = 3
EXIT_OSCILLATING = 4
EXIT_ITERATION_CAP = 5
EXIT_ORACLE_REFUSAL = 6


class BpkitError(Exception):
    """Base error with a user-facing detail and a process exit code."""

    exit_code = EXIT_INVALID

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ParseError(BpkitError):
    """Malformed network or evidence text, located at the offending token."""

    def __init__(self, span, message: str):
        self.span = span
        self.message = message
        super().__init__(f"{span.line}:{span.column}: {message}")


class StructuralError(BpkitError):
    """The network's graph does not allow the requested operation."""


class SchedulingError(StructuralError):
    """A message was requested before its inputs arrived."""


class InconsistentEvidenceError(BpkitError):
    """A message or belief vanished everywhere (zero-weight evidence)."""

    exit_code = EXIT_IMPOSSIBLE_EVIDENCE


class ImpossibleEvidenceError(InconsistentEvidenceError):
    """The evidence has zero total probability or possibility."""


class OracleRefusalError(BpkitError):
    """The joint state space is too large to enumerate."""

    exit_code = EXIT_ORACLE_REFUSAL
