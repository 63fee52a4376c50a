"""Multi-scalar multiplication by the bucket method with presorted, padded buckets.

Scalars are cut into K windows of c bits. For each window the points are stably sorted by
their window value and laid out as a (2^c, N') tensor, one row per bucket, padded with the
identity. Bucket accumulation then runs every row in lock-step over N' slots, bucket
reduction combines the 2^c row sums pairwise in a log-depth tree, and the window sums are
merged by Horner's rule.
"""

from __future__ import annotations

import random
from concurrent.futures import Executor
from logging import getLogger
from typing import Literal, Self, Sequence

import msgspec
import numpy as np

from kernels.counters import OpCounts, absorb, counting, tally
from kernels.edwards import EdPoint, TwistedEdwardsCurve
from utilities.errors import DomainError

__all__ = (
    "MAX_MATERIALIZED_WINDOW_BITS",
    "BucketTensor",
    "MsmInstance",
    "ReduceStrategy",
    "WindowBuckets",
    "bucket_accumulate",
    "bucket_reduce_running",
    "bucket_reduce_tree",
    "bucketize",
    "msm",
    "msm_naive",
    "random_instance",
    "slice_scalars",
    "window_merge",
)

log = getLogger(__name__)

MAX_MATERIALIZED_WINDOW_BITS = 20

ReduceStrategy = Literal["tree", "running"]


class MsmInstance(msgspec.Struct, frozen=True, eq=False):
    scalars: tuple[int, ...]
    points: tuple[EdPoint, ...]
    curve: TwistedEdwardsCurve
    window_bits: int
    scalar_bits: int

    @classmethod
    def create(
        cls,
        scalars: Sequence[int],
        points: Sequence[EdPoint],
        curve: TwistedEdwardsCurve,
        *,
        window_bits: int,
        scalar_bits: int | None = None,
    ) -> Self:
        """Validate an instance.

        Args:
            scalars: N non-negative scalars below 2^scalar_bits.
            points: N points on `curve`.
            curve: The curve and field backend to compute on.
            window_bits: Window width c, 1 <= c <= scalar_bits.
            scalar_bits: Scalar bit length; defaults to the curve's.

        Raises:
            DomainError: On an empty instance, length mismatch, bad window width or oversized scalar.
        """
        scalar_bits = scalar_bits or curve.params.scalar_bits
        if not scalars:
            raise DomainError("an MSM instance needs at least one term")
        if len(scalars) != len(points):
            raise DomainError(f"{len(scalars)} scalars but {len(points)} points")
        if not 1 <= window_bits <= scalar_bits:
            raise DomainError(f"window bits {window_bits} must be in [1, {scalar_bits}]")
        for s in scalars:
            if not 0 <= s < (1 << scalar_bits):
                raise DomainError(f"scalar {s:#x} does not fit {scalar_bits} bits")
        return cls(
            scalars=tuple(int(s) for s in scalars),
            points=tuple(points),
            curve=curve,
            window_bits=window_bits,
            scalar_bits=scalar_bits,
        )

    @property
    def size(self) -> int:
        """Number of terms N."""
        return len(self.scalars)

    @property
    def windows(self) -> int:
        """Window count K = ceil(scalar_bits / c)."""
        return -(-self.scalar_bits // self.window_bits)


class WindowBuckets(msgspec.Struct, eq=False):
    rows: np.ndarray
    occupancy: np.ndarray
    order: np.ndarray

    @property
    def width(self) -> int:
        """Padded row length N'."""
        return self.rows.shape[1]


class BucketTensor(msgspec.Struct, eq=False):
    windows: list[WindowBuckets]
    window_bits: int

    @property
    def width(self) -> int:
        """N', the longest bucket over every window."""
        return max(w.width for w in self.windows)

    @property
    def occupied(self) -> int:
        """Non-identity slots outside bucket 0, summed over windows."""
        return sum(int(w.occupancy[1:].sum()) for w in self.windows)


def random_instance(
    curve: TwistedEdwardsCurve, size: int, window_bits: int, rng: random.Random, *, scalar_bits: int | None = None
) -> MsmInstance:
    """Seeded random scalars and curve points."""
    bits = scalar_bits or curve.params.scalar_bits
    points = [curve.random_point(rng) for _ in range(size)]
    scalars = [rng.getrandbits(bits) for _ in range(size)]
    return MsmInstance.create(scalars, points, curve, window_bits=window_bits, scalar_bits=bits)


def slice_scalars(instance: MsmInstance) -> np.ndarray:
    """Window values s_k[n] = (s_n >> k·c) mod 2^c as a (K, N) array."""
    c = instance.window_bits
    mask = (1 << c) - 1
    dtype = np.uint64 if c <= 63 else object
    return np.array(
        [[(s >> (k * c)) & mask for s in instance.scalars] for k in range(instance.windows)], dtype=dtype
    ).reshape(instance.windows, instance.size)


def bucketize(instance: MsmInstance) -> BucketTensor:
    """Stable presort of every window into an identity-padded bucket tensor.

    Bucket 0 is materialized too, so N' is the largest bucket over all 2^c rows.

    Raises:
        DomainError: If 2^c rows are too many to materialize.
    """
    c = instance.window_bits
    if c > MAX_MATERIALIZED_WINDOW_BITS:
        raise DomainError(f"window of {c} bits is too wide to materialize as a bucket tensor")
    n_rows = 1 << c
    identity = instance.curve.identity()
    slices = slice_scalars(instance).astype(np.int64)
    windows = []
    for values in slices:
        order = np.argsort(values, kind="stable")
        sorted_values = values[order]
        tally("permute", instance.size)
        occupancy = np.bincount(sorted_values, minlength=n_rows)
        starts = np.concatenate(([0], np.cumsum(occupancy)[:-1]))
        rows = np.full((n_rows, int(occupancy.max())), identity, dtype=object)
        for position, (n, bucket) in enumerate(zip(order, sorted_values, strict=True)):
            rows[bucket, position - starts[bucket]] = instance.points[n]
        tally("permute", instance.size)
        windows.append(WindowBuckets(rows=rows, occupancy=occupancy, order=order))
    tensor = BucketTensor(windows=windows, window_bits=c)
    log.debug(f"Bucketized N={instance.size} into K={len(windows)} windows, N'={tensor.width}")
    return tensor


def bucket_accumulate(window: WindowBuckets, curve: TwistedEdwardsCurve) -> list[EdPoint]:
    """Row sums B_j for j >= 1, lock-step over every padded slot; B_0 is the identity.

    Every row issues N' additions; `padd_occupied` records the ones that met a real point.
    """
    identity = curve.identity()
    sums = [identity]
    for j in range(1, window.rows.shape[0]):
        acc = identity
        for point in window.rows[j]:
            acc = curve.padd(acc, point)
        tally("padd_occupied", int(window.occupancy[j]))
        sums.append(acc)
    return sums


def bucket_reduce_tree(buckets: Sequence[EdPoint], curve: TwistedEdwardsCurve) -> EdPoint:
    """Σ j·B_j by log-depth pairwise combination.

    Each level merges adjacent pairs (left, right) carrying a weighted sum W and a plain sum B:
    W' = W_left + W_right + B_right and B' = 2·(B_left + B_right).

    Raises:
        DomainError: If the bucket count is not a power of two.
    """
    count = len(buckets)
    if count < 1 or count & (count - 1):
        raise DomainError(f"bucket count {count} is not a power of two")
    identity = curve.identity()
    weighted = [identity] * count
    plain = list(buckets)
    while len(plain) > 1:
        next_weighted, next_plain = [], []
        for b in range(len(plain) // 2):
            left, right = 2 * b, 2 * b + 1
            w = curve.padd(curve.padd(weighted[left], weighted[right]), plain[right])
            next_weighted.append(w)
            next_plain.append(curve.pdbl(curve.padd(plain[left], plain[right])))
        weighted, plain = next_weighted, next_plain
    return weighted[0]


def bucket_reduce_running(buckets: Sequence[EdPoint], curve: TwistedEdwardsCurve) -> EdPoint:
    """Σ j·B_j by the serial running-sum recurrence, 2(2^c - 1) additions."""
    identity = curve.identity()
    running, total = identity, identity
    for point in reversed(buckets[1:]):
        running = curve.padd(running, point)
        total = curve.padd(total, running)
    return total


def window_merge(sums: Sequence[EdPoint], window_bits: int, curve: TwistedEdwardsCurve) -> EdPoint:
    """Horner merge Σ 2^(k·c)·W_k, (K-1)·c doublings and K-1 additions."""
    acc = sums[-1]
    for w in reversed(sums[:-1]):
        for _ in range(window_bits):
            acc = curve.pdbl(acc)
        acc = curve.padd(acc, w)
    return acc


def _window_sum(
    window: WindowBuckets, curve: TwistedEdwardsCurve, reduce: ReduceStrategy
) -> tuple[EdPoint, OpCounts]:
    with counting() as counts:
        buckets = bucket_accumulate(window, curve)
        if reduce == "tree":
            total = bucket_reduce_tree(buckets, curve)
        else:
            total = bucket_reduce_running(buckets, curve)
    return total, counts


def msm(instance: MsmInstance, *, reduce: ReduceStrategy = "tree", executor: Executor | None = None) -> EdPoint:
    """Σ s_n·P_n by presort, lock-step accumulation, bucket reduction and window merge.

    Args:
        instance: The validated instance.
        reduce: "tree" for the log-depth pairwise reduction, "running" for the serial one.
        executor: Optional pool; windows are independent and run concurrently on it.

    Returns:
        EdPoint: The sum, in the instance's backend representation.
    """
    curve = instance.curve
    tensor = bucketize(instance)
    if executor is None:
        results = [_window_sum(w, curve, reduce) for w in tensor.windows]
    else:
        futures = [executor.submit(_window_sum, w, curve, reduce) for w in tensor.windows]
        results = [f.result() for f in futures]
    for _, counts in results:
        absorb(counts)
    return window_merge([total for total, _ in results], instance.window_bits, curve)


def msm_naive(instance: MsmInstance) -> EdPoint:
    """Σ s_n·P_n by independent double-and-add; the reference result."""
    curve = instance.curve
    acc = curve.identity()
    for s, p in zip(instance.scalars, instance.points, strict=True):
        acc = curve.padd(acc, curve.scalar_mul_oracle(s, p))
    return acc
