"""Twisted Edwards group arithmetic in extended coordinates.

Points are (X, Y, Z, T) with x = X/Z, y = Y/Z and T = X·Y/Z, over any field backend. Addition
is the unified extended-coordinate formula (the a = -1 variant when it applies), so the same
code path handles doubling and the identity (0, 1, 1, 0).
"""

from __future__ import annotations

import random
from logging import getLogger
from typing import Any, Iterator, Self

import msgspec
from sympy.ntheory import sqrt_mod

from kernels.backends import BaseBackend
from kernels.counters import tally
from kernels.field import PrimeField
from utilities.errors import ConfigurationError, ConstructionError, DomainError

__all__ = (
    "CurveParams",
    "EdPoint",
    "TwistedEdwardsCurve",
    "is_square",
    "search_small_curve",
)

log = getLogger(__name__)

ENUMERATION_LIMIT = 1 << 12


def is_square(value: int, beta: int) -> bool:
    """Euler's criterion; zero counts as a square."""
    value %= beta
    return value == 0 or pow(value, (beta - 1) // 2, beta) == 1


def search_small_curve(beta: int) -> tuple[int, int]:
    """Smallest (a, d) with a a nonzero square, d a non-square and a != d.

    Raises:
        ConstructionError: If the field admits no such pair.
    """
    squares = [a for a in range(1, beta) if is_square(a, beta)]
    non_squares = [d for d in range(1, beta) if not is_square(d, beta)]
    for a in squares:
        for d in non_squares:
            if a != d:
                return a, d
    raise ConstructionError(f"no complete twisted Edwards curve over F_{beta}")


class CurveParams(msgspec.Struct, frozen=True):
    name: str
    field: PrimeField
    a: int
    d: int
    scalar_bits: int
    generator: tuple[int, int] | None = None
    order: int | None = None

    @classmethod
    def create(
        cls,
        field: PrimeField,
        a: int,
        d: int,
        *,
        name: str,
        scalar_bits: int | None = None,
        generator: tuple[int, int] | None = None,
        order: int | None = None,
    ) -> Self:
        """Validate and normalize curve coefficients.

        Raises:
            ConfigurationError: If a = d, a coefficient vanishes, d is a square, or the
                generator is off the curve.
        """
        beta = field.beta
        a %= beta
        d %= beta
        if a == 0 or d == 0:
            raise ConfigurationError(f"curve {name}: coefficients must be nonzero")
        if a == d:
            raise ConfigurationError(f"curve {name}: a must differ from d")
        if is_square(d, beta):
            raise ConfigurationError(f"curve {name}: d must be a non-square for complete addition")
        if not is_square(a, beta):
            log.warning(f"Curve {name}: a is a non-square, unified addition may hit exceptional pairs")
        if generator is not None:
            x, y = generator
            if (a * x * x + y * y - 1 - d * x * x * y * y) % beta:
                raise ConfigurationError(f"curve {name}: generator is not on the curve")
        if scalar_bits is None:
            scalar_bits = order.bit_length() if order else field.bits
        return cls(name=name, field=field, a=a, d=d, scalar_bits=scalar_bits, generator=generator, order=order)

    def on_curve(self, x: int, y: int) -> bool:
        """Affine curve equation check."""
        beta = self.field.beta
        return (self.a * x * x + y * y - 1 - self.d * x * x * y * y) % beta == 0

    def affine_add(self, p: tuple[int, int], q: tuple[int, int]) -> tuple[int, int]:
        """Affine addition law, with field inversion; the oracle for the projective formulas."""
        beta = self.field.beta
        (x1, y1), (x2, y2) = p, q
        t = self.d * x1 * x2 * y1 * y2
        x3 = (x1 * y2 + y1 * x2) * pow((1 + t) % beta, -1, beta)
        y3 = (y1 * y2 - self.a * x1 * x2) * pow((1 - t) % beta, -1, beta)
        return x3 % beta, y3 % beta


class EdPoint(msgspec.Struct, frozen=True, eq=False):
    X: Any
    Y: Any
    Z: Any
    T: Any
    curve: str


class TwistedEdwardsCurve:
    def __init__(self, params: CurveParams, backend: BaseBackend) -> None:
        """Bind curve parameters to a field backend.

        Raises:
            ConfigurationError: If the backend is over a different field.
        """
        if backend.field != params.field:
            raise ConfigurationError(f"backend field {backend.field.name} does not match curve {params.name}")
        self.params = params
        self.backend = backend
        beta = params.field.beta
        self._a_is_minus_one = params.a == beta - 1
        self._a_is_one = params.a == 1
        self._a = backend.from_int(params.a)
        self._d = backend.from_int(params.d)
        self._two_d = backend.from_int(2 * params.d)

    def __repr__(self) -> str:
        """Curve and backend names."""
        return f"<TwistedEdwardsCurve {self.params.name} on {self.backend.name}>"

    @property
    def name(self) -> str:
        """Curve name."""
        return self.params.name

    def identity(self) -> EdPoint:
        """The neutral element (0, 1, 1, 0)."""
        be = self.backend
        return EdPoint(be.zero(), be.one(), be.one(), be.zero(), self.name)

    def lift(self, x: int, y: int) -> EdPoint:
        """Affine (x, y) to extended (x, y, 1, x·y).

        Raises:
            DomainError: If the point is not on the curve.
        """
        if not self.params.on_curve(x, y):
            raise DomainError(f"({x:#x}, {y:#x}) is not on curve {self.name}")
        be = self.backend
        beta = self.params.field.beta
        return EdPoint(be.from_int(x), be.from_int(y), be.one(), be.from_int(x * y % beta), self.name)

    def to_affine(self, p: EdPoint) -> tuple[int, int]:
        """Canonical affine coordinates (uses one inversion)."""
        be = self.backend
        beta = self.params.field.beta
        z_inv = pow(be.to_int(p.Z), -1, beta)
        return be.to_int(p.X) * z_inv % beta, be.to_int(p.Y) * z_inv % beta

    def generator(self) -> EdPoint:
        """The configured base point.

        Raises:
            ConfigurationError: If the curve file declares none.
        """
        if self.params.generator is None:
            raise ConfigurationError(f"curve {self.name} has no generator")
        return self.lift(*self.params.generator)

    def _check(self, *points: EdPoint) -> None:
        for p in points:
            if p.curve != self.name:
                raise ConfigurationError(f"point on {p.curve} used with curve {self.name}")

    def negate(self, p: EdPoint) -> EdPoint:
        """-(X, Y, Z, T) = (-X, Y, Z, -T)."""
        self._check(p)
        be = self.backend
        return EdPoint(be.neg(p.X), p.Y, p.Z, be.neg(p.T), self.name)

    def padd(self, p: EdPoint, q: EdPoint) -> EdPoint:
        """Unified addition in extended coordinates.

        Raises:
            ConfigurationError: If either point belongs to another curve.
        """
        self._check(p, q)
        tally("padd")
        be = self.backend
        if self._a_is_minus_one:
            a = be.mul(be.sub(p.Y, p.X), be.sub(q.Y, q.X))
            b = be.mul(be.add(p.Y, p.X), be.add(q.Y, q.X))
            c = be.mul(be.mul(p.T, self._two_d), q.T)
            d = be.mul(be.add(p.Z, p.Z), q.Z)
            e = be.sub(b, a)
            f = be.sub(d, c)
            g = be.add(d, c)
            h = be.add(b, a)
        else:
            a = be.mul(p.X, q.X)
            b = be.mul(p.Y, q.Y)
            c = be.mul(be.mul(p.T, self._d), q.T)
            d = be.mul(p.Z, q.Z)
            e = be.sub(be.sub(be.mul(be.add(p.X, p.Y), be.add(q.X, q.Y)), a), b)
            f = be.sub(d, c)
            g = be.add(d, c)
            h = be.sub(b, a if self._a_is_one else be.mul(self._a, a))
        return EdPoint(be.mul(e, f), be.mul(g, h), be.mul(f, g), be.mul(e, h), self.name)

    def pdbl(self, p: EdPoint) -> EdPoint:
        """Doubling in extended coordinates; T of the input is not read."""
        self._check(p)
        tally("pdbl")
        be = self.backend
        a = be.mul(p.X, p.X)
        b = be.mul(p.Y, p.Y)
        zz = be.mul(p.Z, p.Z)
        c = be.add(zz, zz)
        if self._a_is_minus_one:
            d = be.neg(a)
        elif self._a_is_one:
            d = a
        else:
            d = be.mul(self._a, a)
        xy = be.add(p.X, p.Y)
        e = be.sub(be.sub(be.mul(xy, xy), a), b)
        g = be.add(d, b)
        f = be.sub(g, c)
        h = be.sub(d, b)
        return EdPoint(be.mul(e, f), be.mul(g, h), be.mul(f, g), be.mul(e, h), self.name)

    def scalar_mul_oracle(self, s: int, p: EdPoint) -> EdPoint:
        """Left-to-right double-and-add.

        Raises:
            DomainError: If s is negative.
        """
        if s < 0:
            raise DomainError("scalar must be non-negative")
        acc = self.identity()
        for bit in bin(s)[2:] if s else "":
            acc = self.pdbl(acc)
            if bit == "1":
                acc = self.padd(acc, p)
        return acc

    def eq_points(self, p: EdPoint, q: EdPoint) -> bool:
        """Projective equality by cross multiplication."""
        self._check(p, q)
        be = self.backend
        return be.to_int(be.mul(p.X, q.Z)) == be.to_int(be.mul(q.X, p.Z)) and be.to_int(
            be.mul(p.Y, q.Z)
        ) == be.to_int(be.mul(q.Y, p.Z))

    def is_on_curve(self, p: EdPoint) -> bool:
        """Projective identities a·X² + Y² = Z² + d·T² and X·Y = Z·T."""
        be = self.backend
        beta = self.params.field.beta
        x, y, z, t = (be.to_int(v) for v in (p.X, p.Y, p.Z, p.T))
        curve_ok = (self.params.a * x * x + y * y - z * z - self.params.d * t * t) % beta == 0
        return curve_ok and (x * y - z * t) % beta == 0 and z % beta != 0

    def scale(self, p: EdPoint, factor: int) -> EdPoint:
        """Same point with every coordinate multiplied by a nonzero factor."""
        be = self.backend
        k = be.from_int(factor)
        return EdPoint(be.mul(p.X, k), be.mul(p.Y, k), be.mul(p.Z, k), be.mul(p.T, k), self.name)

    def random_point(self, rng: random.Random) -> EdPoint:
        """Uniformly chosen y, solved for x; seeded and reproducible."""
        beta = self.params.field.beta
        a, d = self.params.a, self.params.d
        while True:
            y = rng.randrange(beta)
            den = (d * y * y - a) % beta
            if den == 0:
                continue
            x2 = (y * y - 1) * pow(den, -1, beta) % beta
            x = sqrt_mod(x2, beta) if x2 else 0
            if x is None:
                continue
            if rng.getrandbits(1):
                x = (-x) % beta
            return self.lift(int(x), y)

    def enumerate_points(self) -> Iterator[tuple[int, int]]:
        """Every affine point, for small fields only.

        Raises:
            DomainError: If the field is too large to enumerate.
        """
        beta = self.params.field.beta
        if beta > ENUMERATION_LIMIT:
            raise DomainError(f"field of size {beta} is too large to enumerate")
        for x in range(beta):
            for y in range(beta):
                if self.params.on_curve(x, y):
                    yield x, y
