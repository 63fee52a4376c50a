"""Residue number system bases and exact CRT conversion.

A basis is a tuple of pairwise-coprime odd moduli below 2^32. Vectors carry one residue per
modulus; every per-limb operation here touches limb i of its inputs only.
"""

from __future__ import annotations

import functools
import math
import random
from logging import getLogger
from typing import Iterable, Self, Sequence

import msgspec
import numpy as np

from utilities.errors import ConfigurationError, ConstructionError, DomainError, ParameterFileError

__all__ = (
    "RnsBasis",
    "RnsVector",
    "add_limbs",
    "build_basis",
    "crt_constants",
    "dump_basis",
    "from_rns",
    "from_rns_batch",
    "limb_mont_mul",
    "limb_mont_mul_batch",
    "load_basis",
    "sub_limbs",
    "to_rns",
    "to_rns_batch",
)

log = getLogger(__name__)

DEFAULT_W = 32
_MAX_DRAWS_PER_LIMB = 10_000


class RnsBasis(msgspec.Struct, frozen=True):
    moduli: tuple[int, ...]
    product: int
    ninv: tuple[int, ...]
    w: int = DEFAULT_W

    @classmethod
    def from_moduli(cls, moduli: Iterable[int], *, w: int = DEFAULT_W) -> Self:
        """Validate moduli and derive the per-limb Montgomery constants.

        Raises:
            ConstructionError: If a modulus is even, out of range, or shares a factor with another.
        """
        moduli = tuple(int(q) for q in moduli)
        if not moduli:
            raise ConstructionError("a basis needs at least one modulus")
        for i, q in enumerate(moduli):
            if q < 3 or q % 2 == 0 or q >> 32:
                raise ConstructionError(f"modulus {q} must be odd and in [3, 2^32)")
            if q >> w:
                raise ConstructionError(f"modulus {q} does not fit the {w}-bit Montgomery factor")
            for other in moduli[:i]:
                if math.gcd(q, other) != 1:
                    raise ConstructionError(f"moduli {other} and {q} are not coprime")
        radix = 1 << w
        return cls(
            moduli=moduli,
            product=math.prod(moduli),
            ninv=tuple((-pow(q, -1, radix)) % radix for q in moduli),
            w=w,
        )

    def __len__(self) -> int:
        """Limb count."""
        return len(self.moduli)

    @property
    def narrow(self) -> bool:
        """True when every per-limb product and REDC fits uint64 arithmetic."""
        return max(self.moduli) < (1 << 31) and self.w <= DEFAULT_W

    def moduli_array(self) -> np.ndarray:
        """Moduli as a uint64 row vector."""
        return np.array(self.moduli, dtype=np.uint64)


class RnsVector(msgspec.Struct, frozen=True):
    residues: tuple[int, ...]
    basis: RnsBasis

    @classmethod
    def of(cls, residues: Sequence[int], basis: RnsBasis) -> Self:
        """Build a vector, validating residues against the basis.

        Raises:
            DomainError: If the residue count or a residue value is out of range.
        """
        residues = tuple(int(r) for r in residues)
        if len(residues) != len(basis.moduli):
            raise DomainError(f"expected {len(basis.moduli)} residues, got {len(residues)}")
        for r, q in zip(residues, basis.moduli, strict=True):
            if not 0 <= r < q:
                raise DomainError(f"residue {r} is outside [0, {q})")
        return cls(residues=residues, basis=basis)


def build_basis(
    limb_count: int,
    seed: int,
    forbidden: Iterable[int] = (),
    *,
    pool: Iterable[int] | None = None,
    full_width: bool = False,
    w: int = DEFAULT_W,
) -> RnsBasis:
    """Deterministically pick `limb_count` pairwise-coprime odd moduli.

    Candidates are drawn from [2^30, 2^31) by default, [2^31, 2^32) with `full_width`, or from
    an explicit `pool`. A candidate is rejected when it shares a factor with an already chosen
    modulus or with any member of `forbidden`.

    Args:
        limb_count: Number of moduli.
        seed: Seed for the candidate stream.
        forbidden: Integers every modulus must be coprime to (typically the field prime).
        pool: Optional explicit candidate set, consumed in seeded order.
        full_width: Draw 32-bit instead of 31-bit moduli.
        w: Per-limb Montgomery bit-width.

    Returns:
        RnsBasis: The basis with its exact product.

    Raises:
        DomainError: If limb_count < 1.
        ConstructionError: If not enough coprime moduli can be found.
    """
    if limb_count < 1:
        raise DomainError("limb_count must be at least 1")
    rng = random.Random(seed)
    blocked = tuple(forbidden)
    chosen: list[int] = []

    def acceptable(q: int) -> bool:
        if q < 3 or q % 2 == 0 or q >> w:
            return False
        return all(math.gcd(q, c) == 1 for c in chosen) and all(math.gcd(q, f) == 1 for f in blocked)

    if pool is not None:
        candidates = sorted(set(pool))
        rng.shuffle(candidates)
        for q in candidates:
            if acceptable(q):
                chosen.append(q)
            if len(chosen) == limb_count:
                break
    else:
        low, high = (1 << 31, 1 << 32) if full_width else (1 << 30, 1 << 31)
        for _ in range(limb_count * _MAX_DRAWS_PER_LIMB):
            q = rng.randrange(low + 1, high, 2)
            if acceptable(q):
                chosen.append(q)
            if len(chosen) == limb_count:
                break

    if len(chosen) < limb_count:
        raise ConstructionError(f"found only {len(chosen)} of {limb_count} coprime moduli (seed {seed})")
    basis = RnsBasis.from_moduli(chosen, w=w)
    log.debug(f"Built {limb_count}-limb basis, {basis.product.bit_length()} bits, seed {seed}")
    return basis


@functools.cache
def crt_constants(basis: RnsBasis) -> tuple[int, ...]:
    """CRT reconstruction constants ((Q/q_i)^-1 mod q_i)·(Q/q_i), one per limb."""
    out = []
    for q in basis.moduli:
        cofactor = basis.product // q
        out.append(pow(cofactor, -1, q) * cofactor)
    return tuple(out)


def to_rns(x: int, basis: RnsBasis) -> RnsVector:
    """Residues of x, which must lie in [0, Q).

    Raises:
        DomainError: If x is out of range.
    """
    if not 0 <= x < basis.product:
        raise DomainError(f"{x:#x} is outside [0, Q) for a {len(basis)}-limb basis")
    return RnsVector(residues=tuple(x % q for q in basis.moduli), basis=basis)


def from_rns(v: RnsVector) -> int:
    """Exact CRT reconstruction into [0, Q)."""
    constants = crt_constants(v.basis)
    return sum(r * c for r, c in zip(v.residues, constants, strict=True)) % v.basis.product


def to_rns_batch(values: Sequence[int], basis: RnsBasis) -> np.ndarray:
    """Residue matrix of shape (len(values), I), uint64."""
    for x in values:
        if not 0 <= x < basis.product:
            raise DomainError(f"{x:#x} is outside [0, Q)")
    return np.array([[x % q for q in basis.moduli] for x in values], dtype=np.uint64).reshape(
        len(values), len(basis.moduli)
    )


def from_rns_batch(residues: np.ndarray, basis: RnsBasis) -> list[int]:
    """Exact CRT reconstruction of every row of a residue matrix."""
    constants = np.array(crt_constants(basis), dtype=object)
    sums = residues.astype(object) @ constants
    return [int(s) % basis.product for s in np.atleast_1d(sums)]


def _check_same_basis(a: RnsVector, b: RnsVector) -> RnsBasis:
    if a.basis != b.basis:
        raise ConfigurationError("RNS basis mismatch between operands")
    return a.basis


def _redc(t: int, q: int, ninv: int, w: int) -> int:
    mask = (1 << w) - 1
    m = ((t & mask) * ninv) & mask
    out = (t + m * q) >> w
    return out - q if out >= q else out


def limb_mont_mul(a: RnsVector, b: RnsVector) -> RnsVector:
    """Per-limb Montgomery product a_i·b_i·2^(-w) mod q_i.

    Raises:
        ConfigurationError: If the operands use different bases.
    """
    basis = _check_same_basis(a, b)
    residues = tuple(
        _redc(x * y, q, ninv, basis.w)
        for x, y, q, ninv in zip(a.residues, b.residues, basis.moduli, basis.ninv, strict=True)
    )
    return RnsVector(residues=residues, basis=basis)


def limb_mont_mul_batch(a: np.ndarray, b: np.ndarray, basis: RnsBasis) -> np.ndarray:
    """Per-limb Montgomery product over (batch, I) residue matrices."""
    if not basis.narrow:
        rows = [
            [_redc(int(x) * int(y), q, n, basis.w) for x, y, q, n in zip(ra, rb, basis.moduli, basis.ninv, strict=True)]
            for ra, rb in zip(a, b, strict=True)
        ]
        return np.array(rows, dtype=np.uint64).reshape(a.shape)
    moduli = basis.moduli_array()
    ninv = np.array(basis.ninv, dtype=np.uint64)
    mask = np.uint64((1 << basis.w) - 1)
    t = a.astype(np.uint64) * b.astype(np.uint64)
    m = ((t & mask) * ninv) & mask
    out = (t + m * moduli) >> np.uint64(basis.w)
    return np.where(out >= moduli, out - moduli, out)


def add_limbs(a: RnsVector, b: RnsVector) -> RnsVector:
    """Per-limb modular sum."""
    basis = _check_same_basis(a, b)
    return RnsVector(
        residues=tuple((x + y) % q for x, y, q in zip(a.residues, b.residues, basis.moduli, strict=True)),
        basis=basis,
    )


def sub_limbs(a: RnsVector, b: RnsVector) -> RnsVector:
    """Per-limb modular difference."""
    basis = _check_same_basis(a, b)
    return RnsVector(
        residues=tuple((x - y) % q for x, y, q in zip(a.residues, b.residues, basis.moduli, strict=True)),
        basis=basis,
    )


class BasisDump(msgspec.Struct, forbid_unknown_fields=True):
    w: int
    moduli: list[int]
    product: str


def dump_basis(basis: RnsBasis) -> bytes:
    """Serialize a basis: moduli in order plus hex Q."""
    return msgspec.toml.encode(BasisDump(w=basis.w, moduli=list(basis.moduli), product=format(basis.product, "x")))


def load_basis(data: bytes | str, *, source: str = "<basis>") -> RnsBasis:
    """Read a basis dump, checking that the recorded product matches the moduli.

    Raises:
        ParameterFileError: If the dump cannot be decoded or is inconsistent.
    """
    try:
        dump = msgspec.toml.decode(data, type=BasisDump)
    except msgspec.DecodeError as exc:
        raise ParameterFileError(source, str(exc)) from exc
    basis = RnsBasis.from_moduli(dump.moduli, w=dump.w)
    if format(basis.product, "x") != dump.product.lower():
        raise ParameterFileError(source, "recorded product does not match the moduli")
    return basis
