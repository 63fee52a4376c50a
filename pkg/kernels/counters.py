"""Operation counters for kernel runs.

Kernels call :func:`tally` on their hot paths. Counting is off unless a caller wraps the
run in :func:`counting`, which installs a fresh :class:`OpCounts` for the current context.
"""

from __future__ import annotations

import contextlib
import contextvars
from typing import Iterator, Literal

import msgspec

__all__ = ("OpCounts", "OpKind", "absorb", "counting", "tally")

OpKind = Literal[
    "field_mul",
    "digit_mul",
    "mac",
    "byte_mac",
    "elementwise",
    "permute",
    "padd",
    "padd_occupied",
    "pdbl",
    "settle",
]


class OpCounts(msgspec.Struct):
    field_mul: int = 0
    digit_mul: int = 0
    mac: int = 0
    byte_mac: int = 0
    elementwise: int = 0
    permute: int = 0
    padd: int = 0
    padd_occupied: int = 0
    pdbl: int = 0
    settle: int = 0

    def as_dict(self) -> dict[str, int]:
        """Return the counts as a plain mapping."""
        return msgspec.structs.asdict(self)

    def merge(self, other: OpCounts) -> None:
        """Add another set of counts into this one."""
        for name, value in other.as_dict().items():
            setattr(self, name, getattr(self, name) + value)


_active: contextvars.ContextVar[OpCounts | None] = contextvars.ContextVar("morph_op_counts", default=None)


def tally(kind: OpKind, amount: int = 1) -> None:
    """Record `amount` operations of `kind` in the innermost active counter, if any."""
    counts = _active.get()
    if counts is not None:
        setattr(counts, kind, getattr(counts, kind) + amount)


@contextlib.contextmanager
def counting() -> Iterator[OpCounts]:
    """Count operations executed inside the block.

    Yields:
        OpCounts: Live counts, final once the block exits.
    """
    counts = OpCounts()
    token = _active.set(counts)
    try:
        yield counts
    finally:
        _active.reset(token)


def absorb(counts: OpCounts) -> None:
    """Merge counts gathered elsewhere (e.g. in a worker thread) into the active counter."""
    active = _active.get()
    if active is not None:
        active.merge(counts)
