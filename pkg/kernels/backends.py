"""Field backends: one arithmetic interface, three number representations.

Curve arithmetic and the NTT dataflows are written once against :class:`FieldBackend`.

* ``oracle``: plain integers reduced by division after every operation.
* ``radix-mont``: radix-2^32 digit vectors kept in Montgomery form (field-core baseline).
* ``rns-lazy``: Montgomery-scaled RNS vectors reduced by the lazy matmul pipeline. Results
  are only congruent mod beta until ``to_int`` normalizes them; sums are re-bounded with
  ``settle`` and subtraction adds a multiple of beta large enough to keep values non-negative.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from logging import getLogger
from typing import Any, Literal, Protocol, get_args

import numpy as np

from kernels import field as fc
from kernels.counters import tally
from kernels.field import PrimeField
from kernels.lazy import (
    LazyTables,
    encode,
    lazy_reduce,
    lazy_reduce_batch,
    modmul_lazy,
    normalize_to_canonical,
    precompute,
    size_basis,
)
from kernels.rns import RnsVector, add_limbs, limb_mont_mul, limb_mont_mul_batch, sub_limbs
from utilities.errors import ConfigurationError

__all__ = (
    "BACKENDS",
    "BackendName",
    "BaseBackend",
    "FieldBackend",
    "OracleBackend",
    "RadixMontBackend",
    "RnsLazyBackend",
    "get_backend",
)

log = getLogger(__name__)

BackendName = Literal["oracle", "radix-mont", "rns-lazy"]
BACKENDS: tuple[str, ...] = get_args(BackendName)

# Widest inner dimension the int64 split matmul can accumulate without overflow.
_SPLIT_MAX_INNER = 1 << 15
_SPLIT_BITS = 16


class FieldBackend(Protocol):
    name: str
    field: PrimeField

    def from_int(self, value: int) -> Any: ...
    def to_int(self, element: Any) -> int: ...
    def zero(self) -> Any: ...
    def one(self) -> Any: ...
    def add(self, a: Any, b: Any) -> Any: ...
    def sub(self, a: Any, b: Any) -> Any: ...
    def neg(self, a: Any) -> Any: ...
    def mul(self, a: Any, b: Any) -> Any: ...
    def settle(self, a: Any) -> Any: ...
    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...
    def hadamard(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...


class BaseBackend[E](ABC):
    name: str

    def __init__(self, field: PrimeField) -> None:
        """Initialize the backend for one prime field."""
        self.field = field

    def __repr__(self) -> str:
        """Backend name and field."""
        return f"<{type(self).__name__} {self.name} {self.field.name}>"

    @abstractmethod
    def from_int(self, value: int) -> E:
        """Encode an integer (reduced mod beta first)."""

    @abstractmethod
    def to_int(self, element: E) -> int:
        """Canonical integer value in [0, beta)."""

    @abstractmethod
    def add(self, a: E, b: E) -> E: ...

    @abstractmethod
    def sub(self, a: E, b: E) -> E: ...

    @abstractmethod
    def mul(self, a: E, b: E) -> E: ...

    def zero(self) -> E:
        """Additive identity."""
        return self.from_int(0)

    def one(self) -> E:
        """Multiplicative identity."""
        return self.from_int(1)

    def neg(self, a: E) -> E:
        """Additive inverse."""
        return self.sub(self.zero(), a)

    def settle(self, a: E) -> E:
        """Bring an accumulated value back within the backend's operand bound."""
        return a

    def encode_array(self, values: np.ndarray) -> np.ndarray:
        """Encode an integer array into an object array of elements."""
        out = np.empty(values.shape, dtype=object)
        for index, value in np.ndenumerate(values):
            out[index] = self.from_int(int(value))
        return out

    def decode_array(self, elements: np.ndarray) -> np.ndarray:
        """Canonical integers of an element array, as an object array."""
        out = np.empty(elements.shape, dtype=object)
        for index, element in np.ndenumerate(elements):
            out[index] = self.to_int(element)
        return out

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Field matrix product of two 2-D element arrays."""
        rows, inner = a.shape
        cols = b.shape[1]
        tally("mac", rows * inner * cols)
        out = np.empty((rows, cols), dtype=object)
        for i in range(rows):
            for j in range(cols):
                acc = self.mul(a[i, 0], b[0, j])
                for t in range(1, inner):
                    acc = self.add(acc, self.mul(a[i, t], b[t, j]))
                out[i, j] = self.settle(acc)
        return out

    def hadamard(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise field product of two equally shaped element arrays."""
        tally("elementwise", a.size)
        out = np.empty(a.shape, dtype=object)
        for index, x in np.ndenumerate(a):
            out[index] = self.mul(x, b[index])
        return out


class OracleBackend(BaseBackend[int]):
    name = "oracle"

    def from_int(self, value: int) -> int:
        """Reduce into [0, beta)."""
        return value % self.field.beta

    def to_int(self, element: int) -> int:
        """Identity; elements are canonical."""
        return element

    def add(self, a: int, b: int) -> int:
        """(a + b) mod beta."""
        return (a + b) % self.field.beta

    def sub(self, a: int, b: int) -> int:
        """(a - b) mod beta."""
        return (a - b) % self.field.beta

    def mul(self, a: int, b: int) -> int:
        """(a·b) mod beta."""
        tally("field_mul")
        return (a * b) % self.field.beta

    def encode_array(self, values: np.ndarray) -> np.ndarray:
        """Reduce an integer array, keeping Python ints."""
        return np.vectorize(lambda v: int(v) % self.field.beta, otypes=[object])(values)

    def decode_array(self, elements: np.ndarray) -> np.ndarray:
        """Elements already are canonical integers."""
        return elements.astype(object)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Matrix product; primes below 2^31 take an int64 path splitting `a` into 16-bit halves."""
        rows, inner = a.shape
        cols = b.shape[1]
        tally("mac", rows * inner * cols)
        tally("field_mul", rows * inner * cols)
        beta = self.field.beta
        if beta >> 31 or inner > _SPLIT_MAX_INNER:
            return (a.astype(object) @ b.astype(object)) % beta
        left = a.astype(np.int64)
        right = b.astype(np.int64)
        low = ((left & 0xFFFF) @ right) % beta
        high = ((left >> _SPLIT_BITS) @ right) % beta
        return (((high << _SPLIT_BITS) + low) % beta).astype(object)

    def hadamard(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise product mod beta."""
        tally("elementwise", a.size)
        tally("field_mul", a.size)
        beta = self.field.beta
        if beta >> 31:
            return (a.astype(object) * b.astype(object)) % beta
        return ((a.astype(np.int64) * b.astype(np.int64)) % beta).astype(object)


class RadixMontBackend(BaseBackend[fc.FieldElement]):
    name = "radix-mont"

    def from_int(self, value: int) -> fc.FieldElement:
        """Montgomery form value·2^(32d) mod beta."""
        return fc.to_montgomery(fc.FieldElement.from_int(self.field, value % self.field.beta))

    def to_int(self, element: fc.FieldElement) -> int:
        """Leave Montgomery form."""
        return fc.from_montgomery(element).value

    def add(self, a: fc.FieldElement, b: fc.FieldElement) -> fc.FieldElement:
        """Digit-serial modular sum."""
        return fc.add_mod(a, b)

    def sub(self, a: fc.FieldElement, b: fc.FieldElement) -> fc.FieldElement:
        """Digit-serial modular difference."""
        return fc.sub_mod(a, b)

    def neg(self, a: fc.FieldElement) -> fc.FieldElement:
        """Digit-serial negation."""
        return fc.neg_mod(a)

    def mul(self, a: fc.FieldElement, b: fc.FieldElement) -> fc.FieldElement:
        """Radix Montgomery product; stays in Montgomery form."""
        return fc.mont_mul_radix(a, b)


class RnsLazyBackend(BaseBackend[RnsVector]):
    name = "rns-lazy"

    def __init__(
        self,
        field: PrimeField,
        tables: LazyTables | None = None,
        *,
        seed: int = 0,
        check_bounds: bool = False,
    ) -> None:
        """Initialize the RNS backend.

        Args:
            field: The prime field.
            tables: Lazy tables with basis_p equal to basis_q; sized from `seed` when omitted.
            seed: Seed for basis selection.
            check_bounds: Verify operand bounds on every multiplication.

        Raises:
            ConfigurationError: If the tables are for another field or use two bases.
        """
        super().__init__(field)
        if tables is None:
            tables = precompute(size_basis(field, seed=seed), None, field)
        if tables.field != field:
            raise ConfigurationError("lazy tables were built for a different field")
        if tables.basis_p != tables.basis_q:
            raise ConfigurationError("chained lazy arithmetic needs basis_p == basis_q")
        self.tables = tables
        self.check_bounds = check_bounds
        self._one = encode(1, tables)
        self._offset = encode(4 * tables.lazy_bound, tables)
        log.debug(f"rns-lazy backend for {field.name}: {len(tables.basis_q)} limbs")

    def from_int(self, value: int) -> RnsVector:
        """z·(value mod beta) over basis_q."""
        return encode(value % self.field.beta, self.tables)

    def to_int(self, element: RnsVector) -> int:
        """Normalize to the canonical value."""
        return normalize_to_canonical(element, self.tables).value

    def add(self, a: RnsVector, b: RnsVector) -> RnsVector:
        """Per-limb sum; the represented value grows."""
        return add_limbs(a, b)

    def sub(self, a: RnsVector, b: RnsVector) -> RnsVector:
        """a + (4·L - b) per limb, where L bounds every multiplication output."""
        return add_limbs(a, sub_limbs(self._offset, b))

    def mul(self, a: RnsVector, b: RnsVector) -> RnsVector:
        """Lazy modular multiplication."""
        return modmul_lazy(a, b, self.tables, check_bounds=self.check_bounds)

    def settle(self, a: RnsVector) -> RnsVector:
        """Multiply by an encoded one so the value falls back under the lazy bound."""
        tally("settle")
        return lazy_reduce(limb_mont_mul(a, self._one), self.tables)

    def _residues(self, elements: np.ndarray) -> np.ndarray:
        limbs = len(self.tables.basis_q)
        flat = [e.residues for e in elements.reshape(-1)]
        return np.array(flat, dtype=np.uint64).reshape((*elements.shape, limbs))

    def _vectors(self, residues: np.ndarray) -> np.ndarray:
        shape = residues.shape[:-1]
        out = np.empty(shape, dtype=object)
        basis = self.tables.basis_q
        for index in np.ndindex(shape):
            out[index] = RnsVector(residues=tuple(int(r) for r in residues[index]), basis=basis)
        return out

    def _reduce_products(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        limbs = left.shape[-1]
        flat_left = left.reshape(-1, limbs)
        flat_right = right.reshape(-1, limbs)
        tally("field_mul", flat_left.shape[0])
        products = limb_mont_mul_batch(flat_left, flat_right, self.tables.basis_q)
        return lazy_reduce_batch(products, self.tables).reshape(left.shape)

    def matmul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Batched limb-wise matrix product: all lazy products at once, per-limb sums, one settle pass."""
        rows, inner = a.shape
        cols = b.shape[1]
        tally("mac", rows * inner * cols)
        left = np.broadcast_to(self._residues(a)[:, :, None, :], (rows, inner, cols, len(self.tables.basis_q)))
        right = np.broadcast_to(self._residues(b)[None, :, :, :], left.shape)
        products = self._reduce_products(np.ascontiguousarray(left), np.ascontiguousarray(right))
        moduli = self.tables.basis_q.moduli_array()
        sums = np.zeros((rows, cols, len(moduli)), dtype=np.uint64)
        for t in range(inner):
            sums = (sums + products[:, t, :, :]) % moduli
        tally("settle", rows * cols)
        flat_sums = sums.reshape(-1, len(moduli))
        one = np.tile(np.array(self._one.residues, dtype=np.uint64), (flat_sums.shape[0], 1))
        settled = lazy_reduce_batch(limb_mont_mul_batch(flat_sums, one, self.tables.basis_q), self.tables)
        return self._vectors(settled.reshape(sums.shape))

    def hadamard(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Batched elementwise lazy product."""
        tally("elementwise", a.size)
        return self._vectors(self._reduce_products(self._residues(a), self._residues(b)))


def get_backend(name: str, field: PrimeField, *, seed: int = 0, check_bounds: bool = False) -> BaseBackend:
    """Construct a backend by name.

    Raises:
        ConfigurationError: If the name is unknown.
    """
    match name:
        case "oracle":
            return OracleBackend(field)
        case "radix-mont":
            return RadixMontBackend(field)
        case "rns-lazy":
            return RnsLazyBackend(field, seed=seed, check_bounds=check_bounds)
        case _:
            raise ConfigurationError(f"unknown backend {name!r}; expected one of {', '.join(BACKENDS)}")
