"""Number theoretic transforms as dense matrix dataflows.

``X_k = Σ_n x_n·ω^(k·n) mod β`` for a power-of-two length N dividing β - 1, computed four
ways over any field backend:

* direct: one N×N matrix-vector product, the reference.
* butterfly: iterative radix-2 Cooley-Tukey with a bit-reversal permutation.
* three-step: N = R·C; column DFTs as one R×R matmul, a twiddle Hadamard product, row DFTs as
  one C×C matmul, then a transpose.
* five-step: N = R1·R2·C; the three-step column stage is itself split into two smaller DFT
  matmuls around an extra twiddle product.

Index conventions: the input is read row-major as x[n1·C + n2] (three-step) or
x[(m1·R2 + m2)·C + n2] (five-step); the output index is k1 + R·k2, with
k1 = l1 + R1·l2 in the five-step case.
"""

from __future__ import annotations

import functools
import math
from logging import getLogger
from typing import Literal, Sequence, get_args

import msgspec
import numpy as np
import sympy

from kernels.backends import BaseBackend, OracleBackend
from kernels.counters import tally
from kernels.field import PrimeField
from utilities.errors import ConfigurationError, UnsupportedSizeError

__all__ = (
    "VARIANTS",
    "NttPlan",
    "Variant",
    "balanced_factors",
    "cyclic_convolution",
    "find_root",
    "gen_twiddle",
    "intt",
    "make_plan",
    "ntt",
    "ntt_3step",
    "ntt_5step",
    "ntt_butterfly",
    "ntt_direct",
    "schedule_counts",
    "five_step_factorizations",
    "three_step_factorizations",
)

log = getLogger(__name__)

Variant = Literal["direct", "butterfly", "three-step", "five-step"]
VARIANTS: tuple[str, ...] = get_args(Variant)


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise UnsupportedSizeError(f"transform length {n} is not a power of two")
    return n.bit_length() - 1


def find_root(field: PrimeField, n: int) -> int:
    """Primitive n-th root of unity, ω = g^((β-1)/n) for the smallest g >= 2 that yields one.

    Raises:
        UnsupportedSizeError: If n does not divide β - 1.
    """
    beta = field.beta
    if n < 1 or (beta - 1) % n:
        raise UnsupportedSizeError(f"{n} does not divide beta - 1 for field {field.name}")
    if n == 1:
        return 1
    factors = sympy.primefactors(n)
    for g in range(2, beta):
        omega = pow(g, (beta - 1) // n, beta)
        if all(pow(omega, n // p, beta) != 1 for p in factors):
            return omega
    raise UnsupportedSizeError(f"no primitive {n}-th root in field {field.name}")


def balanced_factors(n: int, variant: Variant) -> tuple[int, ...]:
    """Default power-of-two split: C = 2^ceil(log N / 2); for five-step R = R1·R2 with R1 <= R2.

    Raises:
        ConfigurationError: If N is too small for the variant.
    """
    log_n = _log2(n)
    match variant:
        case "three-step":
            c = 1 << -(-log_n // 2)
            return n // c, c
        case "five-step":
            if log_n < 3:
                raise ConfigurationError(f"five-step needs N >= 8, got {n}")
            r_log = max(2, log_n // 2)
            r1_log = r_log // 2
            return 1 << r1_log, 1 << (r_log - r1_log), 1 << (log_n - r_log)
        case _:
            return ()


def three_step_factorizations(n: int) -> list[tuple[int, int]]:
    """Every power-of-two (R, C) with R·C = N."""
    log_n = _log2(n)
    return [(1 << r, 1 << (log_n - r)) for r in range(log_n + 1)]


def five_step_factorizations(n: int) -> list[tuple[int, int, int]]:
    """Every power-of-two (R1, R2, C) with all factors above 1 and product N."""
    log_n = _log2(n)
    return [
        (1 << a, 1 << b, 1 << (log_n - a - b))
        for a in range(1, log_n)
        for b in range(1, log_n - a)
    ]


class NttPlan(msgspec.Struct, frozen=True):
    n: int
    field: PrimeField
    omega: int
    variant: Variant
    factors: tuple[int, ...] = ()

    @property
    def log_n(self) -> int:
        """log2 N."""
        return self.n.bit_length() - 1


def make_plan(
    field: PrimeField, n: int, variant: Variant = "butterfly", factors: Sequence[int] | None = None
) -> NttPlan:
    """Validate a transform plan, filling balanced factors when none are given.

    Raises:
        UnsupportedSizeError: If N is not a power of two or does not divide β - 1.
        ConfigurationError: On an unknown variant or factors that do not multiply to N.
    """
    _log2(n)
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown NTT variant {variant!r}")
    omega = find_root(field, n)
    factors = tuple(factors) if factors else balanced_factors(n, variant)
    match variant:
        case "three-step":
            if len(factors) != 2 or math.prod(factors) != n or min(factors) < 1:
                raise ConfigurationError(f"three-step factors {factors} do not split N={n}")
        case "five-step":
            if len(factors) != 3 or math.prod(factors) != n or min(factors) < 2:
                raise ConfigurationError(f"five-step factors {factors} do not split N={n} into parts above 1")
        case _:
            factors = ()
    return NttPlan(n=n, field=field, omega=omega, variant=variant, factors=factors)


@functools.cache
def gen_twiddle(plan: NttPlan, k: int, rows: int, cols: int) -> np.ndarray:
    """Read-only (rows, cols) matrix of ω^(k·i·j) as canonical integers."""
    beta = plan.field.beta
    base = pow(plan.omega, k, beta)
    powers = [1] * plan.n
    for e in range(1, plan.n):
        powers[e] = powers[e - 1] * base % beta
    table = np.array(powers, dtype=object)
    exponents = np.outer(np.arange(rows, dtype=np.int64), np.arange(cols, dtype=np.int64)) % plan.n
    matrix = table[exponents]
    matrix.flags.writeable = False
    return matrix


def _check_input(x: Sequence[int], plan: NttPlan) -> np.ndarray:
    if len(x) != plan.n:
        raise UnsupportedSizeError(f"input of length {len(x)} does not match plan N={plan.n}")
    return np.array([int(v) % plan.field.beta for v in x], dtype=object)


def _backend(plan: NttPlan, backend: BaseBackend | None) -> BaseBackend:
    if backend is None:
        return OracleBackend(plan.field)
    if backend.field != plan.field:
        raise ConfigurationError(f"backend field {backend.field.name} does not match plan field {plan.field.name}")
    return backend


def _result(elements: np.ndarray, backend: BaseBackend) -> list[int]:
    return [int(v) for v in backend.decode_array(elements)]


def ntt_direct(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """N² dense matrix-vector product; the reference transform."""
    be = _backend(plan, backend)
    values = _check_input(x, plan)
    matrix = be.encode_array(gen_twiddle(plan, 1, plan.n, plan.n))
    out = be.matmul(matrix, be.encode_array(values).reshape(plan.n, 1))
    return _result(out.reshape(plan.n), be)


def _bit_reverse(n: int) -> list[int]:
    bits = n.bit_length() - 1
    return [int(format(i, f"0{bits}b")[::-1], 2) if bits else 0 for i in range(n)]


def ntt_butterfly(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """Iterative radix-2 decimation in time, (N/2)·log N multiplications.

    Values are settled after every stage so lazy backends stay within their operand bound.
    """
    be = _backend(plan, backend)
    values = _check_input(x, plan)
    n, beta = plan.n, plan.field.beta
    a = [be.from_int(int(values[i])) for i in _bit_reverse(n)]
    tally("permute", n)
    half = 1
    while half < n:
        step = pow(plan.omega, n // (2 * half), beta)
        twiddles = [be.from_int(pow(step, j, beta)) for j in range(half)]
        for start in range(0, n, 2 * half):
            for j in range(half):
                u = a[start + j]
                t = be.mul(twiddles[j], a[start + j + half])
                a[start + j] = be.add(u, t)
                a[start + j + half] = be.sub(u, t)
        a = [be.settle(v) for v in a]
        half *= 2
    return [be.to_int(v) for v in a]


def ntt_3step(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """Three-step transform with N = R·C: N(R + C) matmul products plus N twiddle products."""
    be = _backend(plan, backend)
    values = _check_input(x, plan)
    r, c = plan.factors
    a = be.encode_array(values).reshape(r, c)
    y = be.matmul(be.encode_array(gen_twiddle(plan, c, r, r)), a)
    y = be.hadamard(y, be.encode_array(gen_twiddle(plan, 1, r, c)))
    z = be.matmul(y, be.encode_array(gen_twiddle(plan, r, c, c)))
    tally("permute", plan.n)
    return _result(z.T.reshape(plan.n), be)


def ntt_5step(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """Five-step transform with N = R1·R2·C: N(R1 + R2 + C) matmul products plus 2N twiddle products."""
    be = _backend(plan, backend)
    values = _check_input(x, plan)
    r1, r2, c = plan.factors
    r = r1 * r2
    a = be.encode_array(values).reshape(r1, r2 * c)
    b = be.matmul(be.encode_array(gen_twiddle(plan, c * r2, r1, r1)), a).reshape(r1, r2, c)
    inner = np.repeat(gen_twiddle(plan, c, r1, r2)[:, :, None], c, axis=2)
    b = be.hadamard(b, be.encode_array(inner))
    f2 = be.encode_array(gen_twiddle(plan, c * r1, r2, r2))
    b = np.stack([be.matmul(f2, b[l1]) for l1 in range(r1)])
    outer = gen_twiddle(plan, 1, r, c).reshape(r2, r1, c).transpose(1, 0, 2)
    b = be.hadamard(b, be.encode_array(outer))
    z = be.matmul(b.reshape(r, c), be.encode_array(gen_twiddle(plan, r, c, c))).reshape(r1, r2, c)
    tally("permute", plan.n)
    return _result(z.transpose(2, 1, 0).reshape(plan.n), be)


def ntt(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """Dispatch on the plan's variant."""
    match plan.variant:
        case "direct":
            return ntt_direct(x, plan, backend)
        case "butterfly":
            return ntt_butterfly(x, plan, backend)
        case "three-step":
            return ntt_3step(x, plan, backend)
        case "five-step":
            return ntt_5step(x, plan, backend)
    raise ConfigurationError(f"unknown NTT variant {plan.variant!r}")


def intt(x: Sequence[int], plan: NttPlan, backend: BaseBackend | None = None) -> list[int]:
    """Inverse transform through the forward plan with ω^-1, scaled by N^-1."""
    beta = plan.field.beta
    inverse = msgspec.structs.replace(plan, omega=pow(plan.omega, -1, beta))
    n_inv = pow(plan.n, -1, beta)
    return [v * n_inv % beta for v in ntt(x, inverse, backend)]


def cyclic_convolution(a: Sequence[int], b: Sequence[int], beta: int) -> list[int]:
    """Quadratic reference: c_k = Σ_{i+j ≡ k mod N} a_i·b_j mod β."""
    n = len(a)
    out = [0] * n
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[(i + j) % n] = (out[(i + j) % n] + ai * bj) % beta
    return out


def schedule_counts(plan: NttPlan) -> dict[str, int]:
    """Exact multiplication and permutation counts the plan's schedule issues.

    Matmul products also appear as `mac`; twiddle products are the remainder of `field_mul`.
    """
    n = plan.n
    match plan.variant:
        case "direct":
            return {"field_mul": n * n, "mac": n * n, "permute": 0}
        case "butterfly":
            return {"field_mul": (n // 2) * plan.log_n, "mac": 0, "permute": n}
        case "three-step":
            r, c = plan.factors
            return {"field_mul": n * (r + c) + n, "mac": n * (r + c), "permute": n}
        case "five-step":
            r1, r2, c = plan.factors
            return {"field_mul": n * (r1 + r2 + c) + 2 * n, "mac": n * (r1 + r2 + c), "permute": n}
    raise ConfigurationError(f"unknown NTT variant {plan.variant!r}")

