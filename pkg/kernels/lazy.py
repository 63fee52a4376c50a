"""MXU-centric RNS lazy reduction.

An input vector over basis Q represents an integer x < Q. ``lazy_reduce`` maps it to a vector
over basis P representing z·(t + m·beta), where t = x·y mod beta, y = 2^-w mod beta, z = 2^w
and m is a small non-negative slack multiple. The reduction is one uint8 matrix product
(byte-decomposed residues against the precomputed E table) plus four vector steps: the
quotient estimate k from a dot product with f, the byte merge, k·g and the final add.
No carry ever crosses a limb boundary.

Table construction (all products exact):

* J_i = ((Q/q_i)^-1 mod q_i)·(Q/q_i), so that sum_i x_i·J_i = x + alpha·Q.
* E row (i, b) holds the bytes of z·((y·J_i·2^(8b)) mod beta) mod p_j for every output limb j.
* f_i = ceil(J_i·2^u / Q); k = floor(sum_i x_i·f_i / 2^u) equals alpha.
* g_j = z·((-y·Q) mod beta) mod p_j.

With k = alpha the merged value is z·(sum_b x_(i,b)·e_(i,b) + alpha·g') which is congruent to
z·x·y modulo z·beta and non-negative by construction.
"""

from __future__ import annotations

import math
from logging import getLogger
from typing import Literal, Sequence

import msgspec
import numpy as np

from kernels.counters import tally
from kernels.field import FieldElement, PrimeField
from kernels.rns import RnsBasis, RnsVector, build_basis, crt_constants, from_rns, limb_mont_mul_batch, to_rns
from utilities.errors import ConfigurationError, ConstructionError, LazyBoundError, ParameterFileError

__all__ = (
    "ACCUMULATOR_BITS",
    "LazyTables",
    "ShiftMode",
    "byte_decompose",
    "byte_decompose_batch",
    "byte_merge",
    "byte_merge_batch",
    "dump_tables",
    "encode",
    "lazy_reduce",
    "lazy_reduce_batch",
    "load_tables",
    "measure_slack",
    "modmul_lazy",
    "modmul_lazy_batch",
    "normalize_to_canonical",
    "precompute",
    "quotient_estimate",
    "size_basis",
    "slack_bound",
)

log = getLogger(__name__)

BYTES_PER_RESIDUE = 4
ACCUMULATOR_BITS = 32
DEFAULT_HEADROOM = 16
# Vector steps per output limb after the matmul: quotient shift, merge, k·g, add.
VECTOR_STEPS = 4

ShiftMode = Literal["compact", "full"]


class LazyTables(msgspec.Struct, frozen=True, eq=False):
    basis_q: RnsBasis
    basis_p: RnsBasis
    field: PrimeField
    w: int
    u: int
    shift: ShiftMode | int
    n_b: int
    n_h: int
    e: np.ndarray
    e_fused: np.ndarray
    f: tuple[int, ...]
    g: tuple[int, ...]
    slack_bound: int

    @property
    def beta(self) -> int:
        """The field prime."""
        return self.field.beta

    @property
    def z(self) -> int:
        """The Montgomery factor 2^w."""
        return 1 << self.w

    @property
    def y(self) -> int:
        """2^-w mod beta."""
        return pow(self.z, -1, self.field.beta)

    @property
    def lazy_bound(self) -> int:
        """Exclusive bound on the unscaled value of any lazy_reduce output."""
        return (self.slack_bound + 1) * self.field.beta


def _shift_for(basis_q: RnsBasis, shift: ShiftMode | int) -> int:
    total = sum(basis_q.moduli)
    compact = (total - 1).bit_length() + 1
    if shift == "compact":
        return compact
    if shift == "full":
        return (basis_q.product * total).bit_length()
    if shift < compact - 1:
        raise ConstructionError(f"shift {shift} is below ceil(log2(sum q_i)) = {compact - 1}")
    return shift


def slack_bound(basis_q: RnsBasis, beta: int, shift: ShiftMode | int = "compact") -> int:
    """Analytic bound on the slack multiple m of any lazy_reduce output over basis_q."""
    constants = crt_constants(basis_q)
    byte_terms = sum(
        min(0xFF, (q - 1) >> (8 * b)) for q in basis_q.moduli for b in range(BYTES_PER_RESIDUE)
    )
    k_max = sum((q - 1) * c for q, c in zip(basis_q.moduli, constants, strict=True)) // basis_q.product
    if shift != "full":
        k_max += 1
    return ((byte_terms + k_max) * (beta - 1)) // beta


def precompute(
    basis_q: RnsBasis,
    basis_p: RnsBasis | None,
    beta: PrimeField | int,
    w: int | None = None,
    *,
    shift: ShiftMode | int = "compact",
) -> LazyTables:
    """Build the E, f and g tables for one (Q, P, beta, w) configuration.

    Args:
        basis_q: Input basis.
        basis_p: Output basis; None reuses basis_q.
        beta: Field prime (or its PrimeField).
        w: Montgomery bit-width; defaults to basis_q.w and must match it.
        shift: "compact" sets u = ceil(log2(sum q_i)) + 1, exact for inputs below Q/2;
            "full" makes the quotient exact for every input below Q; an int is used as u.

    Returns:
        LazyTables: The immutable tables.

    Raises:
        ConfigurationError: If w disagrees with the input basis.
        ConstructionError: If Q <= beta^2, beta shares a factor with a modulus, or the
            matmul would overflow its accumulator.
    """
    field = beta if isinstance(beta, PrimeField) else PrimeField.create(beta)
    basis_p = basis_p or basis_q
    w = basis_q.w if w is None else w
    if w != basis_q.w:
        raise ConfigurationError(f"tables use w={w} but the input basis uses w={basis_q.w}")
    if basis_q.product <= field.beta**2:
        raise ConstructionError("input basis product must exceed beta^2")
    for q in (*basis_q.moduli, *basis_p.moduli):
        if math.gcd(q, field.beta) != 1:
            raise ConstructionError(f"modulus {q} shares a factor with beta")
    n_b = n_h = BYTES_PER_RESIDUE
    rows = len(basis_q) * n_b
    if rows * 0xFF * 0xFF >> ACCUMULATOR_BITS:
        raise ConstructionError(f"{rows} byte rows overflow a {ACCUMULATOR_BITS}-bit accumulator")

    z = 1 << w
    y = pow(z, -1, field.beta)
    u = _shift_for(basis_q, shift)
    constants = crt_constants(basis_q)
    product = basis_q.product

    e = np.zeros((rows, len(basis_p) * n_h), dtype=np.uint8)
    for i, c in enumerate(constants):
        for b in range(n_b):
            scaled = z * ((y * c << (8 * b)) % field.beta)
            for j, p in enumerate(basis_p.moduli):
                residue = scaled % p
                for h in range(n_h):
                    e[i * n_b + b, j * n_h + h] = (residue >> (8 * h)) & 0xFF

    f = tuple(-(-(c << u) // product) for c in constants)
    g_beta = (-y * product) % field.beta
    g = tuple((z * g_beta) % p for p in basis_p.moduli)

    f_width = max(1, -(-(max(f).bit_length() + 8 * (n_b - 1)) // 8))
    fused_cols = np.zeros((rows, f_width), dtype=np.uint8)
    for i, fi in enumerate(f):
        for b in range(n_b):
            shifted = fi << (8 * b)
            for h in range(f_width):
                fused_cols[i * n_b + b, h] = (shifted >> (8 * h)) & 0xFF

    tables = LazyTables(
        basis_q=basis_q,
        basis_p=basis_p,
        field=field,
        w=w,
        u=u,
        shift=shift,
        n_b=n_b,
        n_h=n_h,
        e=e,
        e_fused=np.concatenate([e, fused_cols], axis=1),
        f=f,
        g=g,
        slack_bound=slack_bound(basis_q, field.beta, shift),
    )
    log.debug(
        f"Precomputed lazy tables for {field.name}: I={len(basis_q)}, J={len(basis_p)}, u={u}, "
        f"slack bound {tables.slack_bound}"
    )
    return tables


def size_basis(
    field: PrimeField,
    *,
    w: int = 32,
    seed: int = 0,
    headroom: int = DEFAULT_HEADROOM,
    shift: ShiftMode = "compact",
    full_width: bool = False,
) -> RnsBasis:
    """Smallest seeded basis that keeps lazily bounded products inside Q.

    Operands of a modmul may be sums and offset differences of lazy outputs, up to
    headroom·L with L = (slack_bound + 1)·beta. The basis must hold z·(headroom·L)^2
    (half of Q for the compact shift).

    Raises:
        ConstructionError: If no basis with at most 512 limbs qualifies.
    """
    for limbs in range(1, 513):
        basis = build_basis(limbs, seed, (field.beta,), full_width=full_width, w=w)
        if basis.product <= field.beta**2:
            continue
        bound = (slack_bound(basis, field.beta, shift) + 1) * field.beta
        limit = basis.product if shift == "full" else basis.product // 2
        if (1 << w) * (headroom * bound) ** 2 < limit:
            log.debug(f"Sized basis for {field.name}: {limbs} limbs, {basis.product.bit_length()} bits")
            return basis
    raise ConstructionError(f"no basis up to 512 limbs fits field {field.name}")


def byte_decompose(v: RnsVector) -> np.ndarray:
    """Little-endian bytes of every residue, shape (I, 4)."""
    residues = np.array(v.residues, dtype=np.uint64)
    return byte_decompose_batch(residues[None, :]).reshape(len(v.residues), BYTES_PER_RESIDUE)


def byte_decompose_batch(residues: np.ndarray) -> np.ndarray:
    """Bytes of a (batch, I) residue matrix, flattened to (batch, I·4) uint8."""
    shifts = np.arange(BYTES_PER_RESIDUE, dtype=np.uint64) * np.uint64(8)
    parts = (residues.astype(np.uint64)[:, :, None] >> shifts) & np.uint64(0xFF)
    return parts.astype(np.uint8).reshape(residues.shape[0], -1)


def byte_merge(parts: Sequence[Sequence[int]] | np.ndarray, basis_p: RnsBasis) -> RnsVector:
    """Shift-weighted wide sum of accumulated byte parts, reduced once per limb."""
    residues = []
    for row, p in zip(parts, basis_p.moduli, strict=True):
        wide = sum(int(value) << (8 * h) for h, value in enumerate(row))
        residues.append(wide % p)
    return RnsVector(residues=tuple(residues), basis=basis_p)


def byte_merge_batch(parts: np.ndarray, basis_p: RnsBasis) -> np.ndarray:
    """Batched byte merge of (batch, J, n_h) accumulator parts below 2^32 each."""
    shifts = np.arange(parts.shape[-1], dtype=np.uint64) * np.uint64(8)
    wide = (parts.astype(np.uint64) << shifts).sum(axis=-1, dtype=np.uint64)
    return wide % basis_p.moduli_array()


def quotient_estimate(residues: Sequence[int], tables: LazyTables) -> int:
    """k = floor(sum_i x_i·f_i / 2^u)."""
    return sum(int(x) * fi for x, fi in zip(residues, tables.f, strict=True)) >> tables.u


def lazy_reduce_batch(x: np.ndarray, tables: LazyTables, *, fused: bool = False) -> np.ndarray:
    """Lazy reduction of every row of a (batch, I) residue matrix over basis_q.

    Args:
        x: Residues, uint64.
        tables: Precomputed tables.
        fused: Take the quotient dot product from extra matmul columns instead of a
            standalone wide dot product. Both paths give identical outputs.

    Returns:
        np.ndarray: (batch, J) residues over basis_p.
    """
    batch = x.shape[0]
    limbs_out = len(tables.basis_p)
    cols = limbs_out * tables.n_h
    x_bytes = byte_decompose_batch(x).astype(np.uint64)
    if fused:
        acc = x_bytes @ tables.e_fused.astype(np.uint64)
        shifts = [8 * h for h in range(acc.shape[1] - cols)]
        v = [sum(int(a) << s for a, s in zip(row[cols:], shifts, strict=True)) for row in acc]
        acc = acc[:, :cols]
    else:
        acc = x_bytes @ tables.e.astype(np.uint64)
        f_col = np.array(tables.f, dtype=object)
        v = list(np.atleast_1d(x.astype(object) @ f_col))
    tally("byte_mac", batch * int(tables.e_fused.shape[1] if fused else cols) * x_bytes.shape[1])
    tally("elementwise", batch * VECTOR_STEPS * limbs_out)

    merged = byte_merge_batch(acc.reshape(batch, limbs_out, tables.n_h), tables.basis_p)
    moduli = tables.basis_p.moduli
    k_mod = np.array([[(int(vi) >> tables.u) % p for p in moduli] for vi in v], dtype=np.uint64).reshape(
        batch, limbs_out
    )
    g = np.array(tables.g, dtype=np.uint64)
    return (merged + k_mod * g) % tables.basis_p.moduli_array()


def _check_input_basis(v: RnsVector, tables: LazyTables) -> None:
    if v.basis != tables.basis_q:
        raise ConfigurationError("input vector basis does not match the lazy tables")


def lazy_reduce(x_q: RnsVector, tables: LazyTables, *, fused: bool = False) -> RnsVector:
    """Lazy reduction of one vector; see :func:`lazy_reduce_batch`.

    Raises:
        ConfigurationError: If x_q is not over the tables' input basis.
    """
    _check_input_basis(x_q, tables)
    out = lazy_reduce_batch(np.array([x_q.residues], dtype=np.uint64), tables, fused=fused)
    return RnsVector(residues=tuple(int(r) for r in out[0]), basis=tables.basis_p)


def _check_product_bound(a: RnsVector, b: RnsVector, tables: LazyTables) -> None:
    limit = tables.basis_q.product if tables.shift == "full" else tables.basis_q.product // 2
    if from_rns(a) * from_rns(b) >= tables.z * limit:
        raise LazyBoundError("operand product exceeds the range the lazy tables reduce exactly")


def modmul_lazy(a: RnsVector, b: RnsVector, tables: LazyTables, *, check_bounds: bool = False) -> RnsVector:
    """Per-limb Montgomery product followed by lazy reduction.

    Args:
        a: Lazily encoded operand over basis_q.
        b: Lazily encoded operand over basis_q.
        tables: Lazy tables for the field.
        check_bounds: Verify that the operand product stays in the exactly reduced range.

    Returns:
        RnsVector: Output over basis_p encoding a value congruent to a·b mod beta.

    Raises:
        ConfigurationError: If an operand is over the wrong basis.
        LazyBoundError: If check_bounds is set and the operands are too large.
    """
    _check_input_basis(a, tables)
    _check_input_basis(b, tables)
    if check_bounds:
        _check_product_bound(a, b, tables)
    out = modmul_lazy_batch(
        np.array([a.residues], dtype=np.uint64), np.array([b.residues], dtype=np.uint64), tables
    )
    return RnsVector(residues=tuple(int(r) for r in out[0]), basis=tables.basis_p)


def modmul_lazy_batch(a: np.ndarray, b: np.ndarray, tables: LazyTables, *, fused: bool = False) -> np.ndarray:
    """Batched modmul_lazy over (batch, I) residue matrices."""
    tally("field_mul", a.shape[0])
    tally("elementwise", a.size)
    return lazy_reduce_batch(limb_mont_mul_batch(a, b, tables.basis_q), tables, fused=fused)


def encode(value: int, tables: LazyTables) -> RnsVector:
    """Lazy encoding z·value over basis_q of a non-negative value."""
    return to_rns(tables.z * value, tables.basis_q)


def normalize_to_canonical(v: RnsVector, tables: LazyTables) -> FieldElement:
    """Exact canonical field element of a lazy output: from_rns, then unscale by z mod beta."""
    return FieldElement.from_int(tables.field, (from_rns(v) * tables.y) % tables.beta)


def measure_slack(out: RnsVector, x: int, tables: LazyTables) -> int:
    """Recover m in out = z·(t + m·beta) over P, with t = x·y mod beta.

    The result is exact whenever the true slack is below P.
    """
    modulus = out.basis.product
    t = (x * tables.y) % tables.beta
    scale = pow(tables.z * tables.beta, -1, modulus)
    return ((from_rns(out) - tables.z * t) * scale) % modulus


class TableDump(msgspec.Struct, forbid_unknown_fields=True):
    beta: str
    w: int
    u: int
    shift: str
    moduli_q: list[int]
    moduli_p: list[int]
    e: str
    f: list[str]
    g: list[str]


def dump_tables(tables: LazyTables) -> bytes:
    """Serialize the tables: header, E as row-major hex bytes, f and g as hex."""
    return msgspec.toml.encode(
        TableDump(
            beta=format(tables.beta, "x"),
            w=tables.w,
            u=tables.u,
            shift=str(tables.shift),
            moduli_q=list(tables.basis_q.moduli),
            moduli_p=list(tables.basis_p.moduli),
            e=tables.e.tobytes().hex(),
            f=[format(v, "x") for v in tables.f],
            g=[format(v, "x") for v in tables.g],
        )
    )


def load_tables(data: bytes | str, *, source: str = "<tables>") -> LazyTables:
    """Rebuild tables from a dump and check every recorded entry against the rebuild.

    Raises:
        ParameterFileError: If the dump is malformed or disagrees with the recomputed tables.
    """
    try:
        dump = msgspec.toml.decode(data, type=TableDump)
    except msgspec.DecodeError as exc:
        raise ParameterFileError(source, str(exc)) from exc
    shift: ShiftMode | int = dump.shift if dump.shift in ("compact", "full") else int(dump.shift)  # type: ignore[assignment]
    basis_q = RnsBasis.from_moduli(dump.moduli_q, w=dump.w)
    basis_p = RnsBasis.from_moduli(dump.moduli_p, w=dump.w)
    tables = precompute(basis_q, basis_p, int(dump.beta, 16), dump.w, shift=shift)
    if (
        tables.u != dump.u
        or tables.e.tobytes().hex() != dump.e
        or [format(v, "x") for v in tables.f] != dump.f
        or [format(v, "x") for v in tables.g] != dump.g
    ):
        raise ParameterFileError(source, "recorded tables differ from the recomputed ones")
    return tables
