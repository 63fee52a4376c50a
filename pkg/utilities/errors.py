from __future__ import annotations

import logging
import sys
import traceback
from typing import TYPE_CHECKING

import sentry_sdk

if TYPE_CHECKING:
    import core
    from utilities.base import BaseCommand

__all__ = (
    "ConfigurationError",
    "ConstructionError",
    "DomainError",
    "LazyBoundError",
    "MorphError",
    "ParameterFileError",
    "UnsupportedSizeError",
    "UserFacingError",
    "VerificationError",
    "exit_code_for",
    "on_command_error",
)

log = logging.getLogger(__name__)

EXIT_VERIFICATION_FAILED = 1
EXIT_USER_ERROR = 2


class MorphError(Exception): ...


class UserFacingError(MorphError): ...


class ConfigurationError(UserFacingError): ...


class ParameterFileError(UserFacingError):
    def __init__(self, path: str, reason: str) -> None:
        """Init parameter file error.

        Args:
            path: The file that could not be read or decoded.
            reason: What went wrong.
        """
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DomainError(MorphError): ...


class ConstructionError(MorphError): ...


class UnsupportedSizeError(MorphError): ...


class LazyBoundError(MorphError): ...


class VerificationError(MorphError):
    def __init__(self, suite: str, message: str, *, record: int | None = None) -> None:
        """Init verification error.

        Args:
            suite: Name of the oracle suite that failed.
            message: Human readable description of the mismatch.
            record: Index of the offending record, when the suite reads a vector file.
        """
        where = f" (record {record})" if record is not None else ""
        super().__init__(f"[{suite}] {message}{where}")
        self.suite = suite
        self.message = message
        self.record = record


def exit_code_for(exception: BaseException) -> int:
    """Map an exception to the process exit status."""
    if isinstance(exception, VerificationError):
        return EXIT_VERIFICATION_FAILED
    return EXIT_USER_ERROR


async def on_command_error(morph: core.Morph, command: BaseCommand | None, error: Exception) -> int:
    """Handle errors raised by a command.

    Args:
        morph: The harness running the command.
        command: The command that raised.
        error: The exception.

    Returns:
        int: The exit status to terminate with.

    Raises:
        Exception: Anything that is not a MorphError is re-raised after reporting.
    """
    exception = getattr(error, "original", error)
    with sentry_sdk.new_scope() as scope:
        scope.set_tag("command", command.name if command else "morph")
        run = morph.run_config
        if run is not None:
            scope.set_context("run", {"seed": run.seed, "backend": run.backend})
        sentry_sdk.capture_exception(exception)

    log.debug("".join(traceback.format_exception(None, exception, exception.__traceback__)))

    if isinstance(exception, VerificationError):
        log.error(str(exception))
        print(f"verification failed: {exception}", file=sys.stderr)
    elif isinstance(exception, MorphError):
        log.error(f"{type(exception).__name__}: {exception}")
        print(f"error: {exception}", file=sys.stderr)
    else:
        raise exception
    return exit_code_for(exception)
