from __future__ import annotations

import argparse
from logging import getLogger
from typing import TYPE_CHECKING, Callable, TypeAlias, TypeVar

import msgspec

from utilities.errors import VerificationError

if TYPE_CHECKING:
    from utilities.base import BaseCommand
    from utilities.config import RunConfig

__all__ = ("SUITES", "SuiteContext", "SuiteResult", "suite")

log = getLogger(__name__)

# Failures kept per suite for the report; the rest are only counted.
MAX_RECORDED_FAILURES = 20


class VerificationFailure(msgspec.Struct, frozen=True):
    message: str
    record: int | None = None

    def to_error(self, suite_name: str) -> VerificationError:
        """The exception reported for this failure."""
        return VerificationError(suite_name, self.message, record=self.record)


class SuiteResult(msgspec.Struct):
    name: str
    passed: int = 0
    failed: int = 0
    detail: str = ""
    failures: list[VerificationFailure] = msgspec.field(default_factory=list)

    def to_format_dict(self) -> dict[str, str | None]:
        """Report line for the suite."""
        return {
            "name": self.name,
            "passed": str(self.passed),
            "failed": str(self.failed),
            "detail": self.detail or None,
        }


class SuiteContext:
    def __init__(self, name: str, command: BaseCommand, run: RunConfig, args: argparse.Namespace) -> None:
        """Initialize the state one suite accumulates.

        Args:
            name: The suite name.
            command: The verify command, for parameter and backend helpers.
            run: The run configuration.
            args: Parsed command-line arguments.
        """
        self.command = command
        self.run = run
        self.args = args
        self.result = SuiteResult(name=name)

    @property
    def name(self) -> str:
        """Suite name."""
        return self.result.name

    def check(self, ok: bool, message: str, *, record: int | None = None) -> bool:
        """Count one oracle comparison, recording the message when it fails."""
        if ok:
            self.result.passed += 1
            return True
        self.fail(message, record=record)
        return False

    def fail(self, message: str, *, record: int | None = None) -> None:
        """Count one failed comparison."""
        self.result.failed += 1
        if len(self.result.failures) < MAX_RECORDED_FAILURES:
            self.result.failures.append(VerificationFailure(message, record))
        log.debug(f"[{self.name}] {message}" + (f" (record {record})" if record is not None else ""))


SuiteFn: TypeAlias = Callable[[SuiteContext], None]
F = TypeVar("F", bound=SuiteFn)

SUITES: dict[str, SuiteFn] = {}


def suite(name: str) -> Callable[[F], F]:
    """Register an oracle suite under `name`.

    A suite receives a :class:`SuiteContext`, runs its comparisons through ``ctx.check`` and
    returns nothing; the verify command runs the registered suites concurrently and reports
    their pass counts.
    """

    def decorator(fn: F) -> F:
        if name in SUITES:
            raise ValueError(f"suite {name!r} registered twice")
        SUITES[name] = fn
        return fn

    return decorator
