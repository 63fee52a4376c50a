"""Prime-field arithmetic on radix-2^32 digit vectors.

This is the radix Montgomery baseline and the ground truth every other kernel is checked
against. Elements are little-endian tuples of 32-bit digits; products and reductions
propagate carries digit by digit so the work mirrors a limb-serial implementation.
"""

from __future__ import annotations

from logging import getLogger
from typing import Self

import msgspec
import sympy

from kernels.counters import tally
from utilities.errors import ConfigurationError, ConstructionError, DomainError

__all__ = (
    "DIGIT_BITS",
    "LAZY_BOUND",
    "FieldElement",
    "PrimeField",
    "add_lazy",
    "add_mod",
    "from_digits",
    "from_montgomery",
    "modmul_oracle",
    "mont_mul_radix",
    "mont_reduce",
    "neg_mod",
    "normalize",
    "schoolbook_mul",
    "sub_mod",
    "to_digits",
    "to_montgomery",
)

log = getLogger(__name__)

DIGIT_BITS = 32
DIGIT_MASK = (1 << DIGIT_BITS) - 1
LAZY_BOUND = 2


def to_digits(value: int, count: int) -> tuple[int, ...]:
    """Split a non-negative integer into `count` little-endian 32-bit digits."""
    return tuple((value >> (DIGIT_BITS * i)) & DIGIT_MASK for i in range(count))


def from_digits(digits: tuple[int, ...] | list[int]) -> int:
    """Reassemble little-endian 32-bit digits into an integer."""
    value = 0
    for digit in reversed(digits):
        value = (value << DIGIT_BITS) | digit
    return value


class PrimeField(msgspec.Struct, frozen=True):
    beta: int
    d: int
    mont_r: int
    mont_ninv: int
    two_adicity: int
    name: str = ""

    @classmethod
    def create(cls, beta: int, *, name: str = "") -> Self:
        """Build a field, asserting that the modulus is an odd prime.

        Args:
            beta: The prime modulus.
            name: Human readable name, used in logs and reports.

        Returns:
            PrimeField: The field with its Montgomery constants.

        Raises:
            ConstructionError: If beta is even, too small, or composite.
        """
        if beta < 3 or beta % 2 == 0:
            raise ConstructionError(f"field modulus must be an odd prime, got {beta:#x}")
        if not sympy.isprime(beta):
            raise ConstructionError(f"field modulus {beta:#x} is not prime")
        d = max(1, -(-beta.bit_length() // DIGIT_BITS))
        radix = 1 << DIGIT_BITS
        order = beta - 1
        field = cls(
            beta=beta,
            d=d,
            mont_r=pow(2, DIGIT_BITS * d, beta),
            mont_ninv=(-pow(beta, -1, radix)) % radix,
            two_adicity=(order & -order).bit_length() - 1,
            name=name or f"f{beta.bit_length()}",
        )
        log.debug(f"Created field {field.name}: {beta.bit_length()} bits, d={d}, 2-adicity={field.two_adicity}")
        return field

    @property
    def bits(self) -> int:
        """Bit length of the modulus."""
        return self.beta.bit_length()

    @property
    def modulus_digits(self) -> tuple[int, ...]:
        """The modulus as d digits."""
        return to_digits(self.beta, self.d)

    def element(self, value: int) -> FieldElement:
        """Shorthand for a canonical element of this field."""
        return FieldElement.from_int(self, value)


class FieldElement(msgspec.Struct, frozen=True):
    digits: tuple[int, ...]
    field: PrimeField
    bound: int = 1

    @classmethod
    def from_int(cls, field: PrimeField, value: int, *, bound: int = 1) -> Self:
        """Encode an integer, canonical by default or lazily bounded by `bound`·beta.

        Raises:
            DomainError: If the value is negative, exceeds the bound, or does not fit d digits.
        """
        if value < 0 or value >= bound * field.beta:
            raise DomainError(f"{value:#x} is outside [0, {bound}*beta) for field {field.name}")
        if value >> (DIGIT_BITS * field.d):
            raise DomainError(f"{value:#x} does not fit {field.d} digits")
        return cls(digits=to_digits(value, field.d), field=field, bound=bound)

    @classmethod
    def from_hex(cls, field: PrimeField, text: str) -> Self:
        """Parse lowercase big-endian hex without prefix."""
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise DomainError(f"not a hex field element: {text!r}") from exc
        return cls.from_int(field, value)

    @property
    def value(self) -> int:
        """The integer this element represents."""
        return from_digits(self.digits)

    def to_hex(self) -> str:
        """Lowercase big-endian hex of the canonical value, no prefix."""
        return format(normalize(self).value, "x")

    def __int__(self) -> int:
        """Return the represented integer."""
        return self.value


def _check_same_field(a: FieldElement, b: FieldElement) -> PrimeField:
    if a.field != b.field:
        raise ConfigurationError(f"field mismatch: {a.field.name} vs {b.field.name}")
    return a.field


def _add_digits(a: tuple[int, ...] | list[int], b: tuple[int, ...] | list[int]) -> list[int]:
    """Digit-serial addition; the result carries one extra digit."""
    out = []
    carry = 0
    for x, y in zip(a, b, strict=True):
        acc = x + y + carry
        out.append(acc & DIGIT_MASK)
        carry = acc >> DIGIT_BITS
    out.append(carry)
    return out


def _sub_digits(a: list[int], b: list[int]) -> tuple[list[int], int]:
    """Digit-serial subtraction a - b, returning the digits and the final borrow."""
    out = []
    borrow = 0
    for x, y in zip(a, b, strict=True):
        acc = x - y - borrow
        borrow = 1 if acc < 0 else 0
        out.append(acc & DIGIT_MASK)
    return out, borrow


def _reduce_digits(digits: list[int], field: PrimeField) -> tuple[int, ...]:
    """Subtract beta while the value stays non-negative; digits may be wider than d."""
    modulus = list(field.modulus_digits) + [0] * (len(digits) - field.d)
    while True:
        diff, borrow = _sub_digits(digits, modulus)
        if borrow:
            break
        digits = diff
    if any(digits[field.d :]):
        raise DomainError("reduction left bits above the digit width")
    return tuple(digits[: field.d])


def schoolbook_mul(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Full product of two digit vectors with explicit carry propagation.

    Returns:
        tuple[int, ...]: len(a) + len(b) little-endian digits.
    """
    out = [0] * (len(a) + len(b))
    for i, ai in enumerate(a):
        carry = 0
        for j, bj in enumerate(b):
            acc = out[i + j] + ai * bj + carry
            out[i + j] = acc & DIGIT_MASK
            carry = acc >> DIGIT_BITS
        out[i + len(b)] = carry
    tally("digit_mul", len(a) * len(b))
    return tuple(out)


def mont_reduce(product: tuple[int, ...], field: PrimeField) -> FieldElement:
    """Word-by-word Montgomery reduction of a 2d-digit value below beta·2^(32d).

    Returns:
        FieldElement: product·2^(-32d) mod beta, canonical.
    """
    d = field.d
    modulus = field.modulus_digits
    t = list(product) + [0] * (2 * d + 1 - len(product))
    for i in range(d):
        m = (t[i] * field.mont_ninv) & DIGIT_MASK
        carry = 0
        for j in range(d):
            acc = t[i + j] + m * modulus[j] + carry
            t[i + j] = acc & DIGIT_MASK
            carry = acc >> DIGIT_BITS
        k = i + d
        while carry:
            acc = t[k] + carry
            t[k] = acc & DIGIT_MASK
            carry = acc >> DIGIT_BITS
            k += 1
    tally("digit_mul", d * d)
    return FieldElement(digits=_reduce_digits(t[d:], field), field=field)


def mont_mul_radix(a: FieldElement, b: FieldElement) -> FieldElement:
    """Radix-2^32 Montgomery product a·b·2^(-32d) mod beta.

    Args:
        a: Canonical element.
        b: Canonical element of the same field.

    Returns:
        FieldElement: The canonical Montgomery product.

    Raises:
        ConfigurationError: If the operands belong to different fields.
        DomainError: If an operand is not canonical.
    """
    field = _check_same_field(a, b)
    if a.value >= field.beta or b.value >= field.beta:
        raise DomainError("mont_mul_radix expects canonical operands")
    tally("field_mul")
    return mont_reduce(schoolbook_mul(a.digits, b.digits), field)


def modmul_oracle(a: FieldElement, b: FieldElement) -> FieldElement:
    """a·b mod beta by full-width multiply and division."""
    field = _check_same_field(a, b)
    return FieldElement.from_int(field, (a.value * b.value) % field.beta)


def add_mod(a: FieldElement, b: FieldElement) -> FieldElement:
    """Canonical (a + b) mod beta for canonical or lazy inputs."""
    field = _check_same_field(a, b)
    return FieldElement(digits=_reduce_digits(_add_digits(a.digits, b.digits), field), field=field)


def add_lazy(a: FieldElement, b: FieldElement) -> FieldElement:
    """Sum of two canonical elements with the conditional subtraction deferred (bound 2·beta)."""
    field = _check_same_field(a, b)
    total = _add_digits(a.digits, b.digits)
    if total[-1]:
        return FieldElement(digits=_reduce_digits(total, field), field=field)
    return FieldElement(digits=tuple(total[:-1]), field=field, bound=LAZY_BOUND)


def sub_mod(a: FieldElement, b: FieldElement) -> FieldElement:
    """Canonical (a - b) mod beta for canonical or lazy inputs."""
    field = _check_same_field(a, b)
    left = list(normalize(a).digits)
    right = list(normalize(b).digits)
    diff, borrow = _sub_digits(left, right)
    if borrow:
        diff = _add_digits(diff, field.modulus_digits)[:-1]
    return FieldElement(digits=tuple(diff), field=field)


def neg_mod(a: FieldElement) -> FieldElement:
    """Canonical -a mod beta."""
    return sub_mod(FieldElement.from_int(a.field, 0), a)


def normalize(a: FieldElement) -> FieldElement:
    """Map a lazy element to canonical form."""
    if a.bound == 1 and a.value < a.field.beta:
        return a
    return FieldElement(digits=_reduce_digits([*a.digits, 0], a.field), field=a.field)


def to_montgomery(a: FieldElement) -> FieldElement:
    """a·2^(32d) mod beta."""
    field = a.field
    return FieldElement.from_int(field, (normalize(a).value * field.mont_r) % field.beta)


def from_montgomery(a: FieldElement) -> FieldElement:
    """a·2^(-32d) mod beta, via one Montgomery product with 1."""
    return mont_mul_radix(normalize(a), FieldElement.from_int(a.field, 1))
