from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernels import lazy, rns
from kernels.counters import counting
from kernels.lazy import LazyTables
from kernels.rns import RnsBasis, RnsVector
from tests.strategies import modint
from utilities import params
from utilities.errors import ConfigurationError, ConstructionError, LazyBoundError, ParameterFileError

TOY_BETA = 17
TOY_MODULI = (5, 7, 9, 11, 13)


@pytest.fixture(scope="module")
def toy_basis() -> RnsBasis:
    return RnsBasis.from_moduli(TOY_MODULI, w=8)


@pytest.fixture(scope="module")
def toy_full(toy_basis) -> LazyTables:
    return lazy.precompute(toy_basis, None, TOY_BETA, shift="full")


@pytest.fixture(scope="module")
def toy_compact(toy_basis) -> LazyTables:
    return lazy.precompute(toy_basis, None, TOY_BETA)


@pytest.fixture(scope="module")
def bn254_tables(bn254) -> LazyTables:
    return lazy.precompute(lazy.size_basis(bn254, seed=11), None, bn254)


@pytest.fixture(scope="module", params=["bls12_377_fq", "mnt4_753_fq"])
def wide_tables(request, params_root) -> LazyTables:
    field = params.load_field(params_root, request.param)
    return lazy.precompute(lazy.size_basis(field, seed=3), None, field)


def _slacks(tables: LazyTables, xs: list[int]) -> list[int]:
    out = lazy.lazy_reduce_batch(rns.to_rns_batch(xs, tables.basis_q), tables)
    modulus = tables.basis_p.product
    scale = pow(tables.z * tables.beta, -1, modulus)
    values = rns.from_rns_batch(out, tables.basis_p)
    return [((v - tables.z * (x * tables.y % tables.beta)) * scale) % modulus for x, v in zip(xs, values, strict=True)]


def test_toy_slack_stays_within_bound_for_every_input(toy_full, toy_basis):
    slacks = _slacks(toy_full, list(range(toy_basis.product)))
    assert max(slacks) <= toy_full.slack_bound
    assert min(slacks) >= 0


def test_toy_fused_path_is_identical(toy_full, toy_basis):
    x = rns.to_rns_batch(list(range(toy_basis.product)), toy_basis)
    assert np.array_equal(lazy.lazy_reduce_batch(x, toy_full), lazy.lazy_reduce_batch(x, toy_full, fused=True))


def test_single_vector_matches_batch(toy_full, toy_basis):
    for x in (0, 1, 16, 17, toy_basis.product - 1):
        single = lazy.lazy_reduce(rns.to_rns(x, toy_basis), toy_full)
        batch = lazy.lazy_reduce_batch(rns.to_rns_batch([x], toy_basis), toy_full)
        assert single.residues == tuple(int(v) for v in batch[0])
        assert lazy.measure_slack(single, x, toy_full) == _slacks(toy_full, [x])[0]


def _alpha(x: int, basis: RnsBasis) -> int:
    residues = rns.to_rns(x, basis).residues
    return (sum(r * c for r, c in zip(residues, rns.crt_constants(basis), strict=True)) - x) // basis.product


def test_compact_quotient_is_exact_below_half_q(toy_compact, toy_basis):
    for x in range(toy_basis.product // 2):
        assert lazy.quotient_estimate(rns.to_rns(x, toy_basis).residues, toy_compact) == _alpha(x, toy_basis)


def test_compact_quotient_overshoots_by_at_most_one(toy_compact, toy_basis):
    for x in range(toy_basis.product // 2, toy_basis.product):
        k = lazy.quotient_estimate(rns.to_rns(x, toy_basis).residues, toy_compact)
        assert k - _alpha(x, toy_basis) in (0, 1)


def test_full_quotient_is_exact_everywhere(toy_full, toy_basis):
    for x in range(toy_basis.product):
        assert lazy.quotient_estimate(rns.to_rns(x, toy_basis).residues, toy_full) == _alpha(x, toy_basis)


def test_scaled_crt_constants_reconstruct_the_product(toy_basis):
    y = pow(1 << 8, -1, TOY_BETA)
    q = toy_basis.product
    scaled = [y * c % q for c in rns.crt_constants(toy_basis)]
    for x in range(q):
        residues = rns.to_rns(x, toy_basis).residues
        assert sum(r * i for r, i in zip(residues, scaled, strict=True)) % q == x * y % q


def test_table_shapes(toy_full, toy_basis):
    rows = len(toy_basis) * toy_full.n_b
    assert toy_full.e.shape == (rows, len(toy_basis) * toy_full.n_h)
    assert toy_full.e.dtype == np.uint8
    assert toy_full.e_fused.shape[0] == rows
    assert len(toy_full.f) == len(toy_full.g) == len(toy_basis)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_modmul_lazy_is_congruent(bn254, bn254_tables, data):
    a = data.draw(modint(bn254.beta))
    b = data.draw(modint(bn254.beta))
    out = lazy.modmul_lazy(lazy.encode(a, bn254_tables), lazy.encode(b, bn254_tables), bn254_tables, check_bounds=True)
    assert lazy.normalize_to_canonical(out, bn254_tables).value == a * b % bn254.beta
    assert rns.from_rns(out) < bn254_tables.z * bn254_tables.lazy_bound


def test_lazy_outputs_chain_without_normalizing(bn254, bn254_tables):
    r = random.Random(2)
    value = r.randrange(bn254.beta)
    acc = lazy.encode(value, bn254_tables)
    for _ in range(20):
        factor = r.randrange(bn254.beta)
        acc = lazy.modmul_lazy(acc, lazy.encode(factor, bn254_tables), bn254_tables, check_bounds=True)
        value = value * factor % bn254.beta
    assert lazy.normalize_to_canonical(acc, bn254_tables).value == value


def test_fused_and_unfused_batches_agree(bn254, bn254_tables):
    r = random.Random(8)
    xs = [bn254_tables.z * r.randrange(bn254.beta) for _ in range(16)]
    a = rns.to_rns_batch(xs, bn254_tables.basis_q)
    b = rns.to_rns_batch(xs[::-1], bn254_tables.basis_q)
    plain = lazy.modmul_lazy_batch(a, b, bn254_tables)
    assert np.array_equal(plain, lazy.modmul_lazy_batch(a, b, bn254_tables, fused=True))


def test_modmul_counts(bn254_tables):
    d = len(bn254_tables.basis_q)
    one = rns.to_rns_batch([bn254_tables.z], bn254_tables.basis_q)
    with counting() as counts:
        lazy.modmul_lazy_batch(one, one, bn254_tables)
    assert counts.field_mul == 1
    assert counts.byte_mac == 16 * d * d
    assert counts.mac == 0


def test_oversized_operands_are_reported(bn254_tables):
    top = rns.to_rns(bn254_tables.basis_q.product - 1, bn254_tables.basis_q)
    with pytest.raises(LazyBoundError):
        lazy.modmul_lazy(top, top, bn254_tables, check_bounds=True)


def test_precompute_rejects_small_q(toy_basis):
    with pytest.raises(ConstructionError):
        lazy.precompute(RnsBasis.from_moduli([5, 7], w=8), None, TOY_BETA)


def test_precompute_rejects_modulus_sharing_beta():
    basis = RnsBasis.from_moduli([*TOY_MODULI, 17], w=8)
    with pytest.raises(ConstructionError):
        lazy.precompute(basis, None, TOY_BETA)


def test_precompute_rejects_mismatched_width(toy_basis):
    with pytest.raises(ConfigurationError):
        lazy.precompute(toy_basis, None, TOY_BETA, w=32)


def test_precompute_rejects_short_shift(toy_basis):
    with pytest.raises(ConstructionError):
        lazy.precompute(toy_basis, None, TOY_BETA, shift=2)


def test_input_basis_is_checked(toy_full):
    other = RnsBasis.from_moduli([3, 7, 11, 13, 17, 19], w=8)
    with pytest.raises(ConfigurationError):
        lazy.lazy_reduce(rns.to_rns(1, other), toy_full)


def test_tables_load_back_from_dump(toy_compact):
    loaded = lazy.load_tables(lazy.dump_tables(toy_compact))
    assert np.array_equal(loaded.e, toy_compact.e)
    assert loaded.f == toy_compact.f
    assert loaded.g == toy_compact.g
    assert loaded.u == toy_compact.u


def test_tampered_tables_are_rejected(toy_compact):
    text = lazy.dump_tables(toy_compact).decode()
    tampered = text.replace(f"u = {toy_compact.u}\n", f"u = {toy_compact.u + 1}\n")
    assert tampered != text
    with pytest.raises(ParameterFileError):
        lazy.load_tables(tampered)


@pytest.mark.parametrize("tables", ["toy_full", "toy_compact"])
def test_every_table_entry_follows_its_formula(request, tables, toy_basis):
    t: LazyTables = request.getfixturevalue(tables)
    q = toy_basis.product
    crt = [(q // qi) * pow(q // qi, -1, qi) for qi in toy_basis.moduli]
    assert crt == [36036, 25740, 5005, 16380, 6930]
    for i, c in enumerate(crt):
        for b in range(t.n_b):
            scaled = t.z * ((t.y * c * 2 ** (8 * b)) % TOY_BETA)
            for j, p in enumerate(t.basis_p.moduli):
                for h in range(t.n_h):
                    assert t.e[i * t.n_b + b, j * t.n_h + h] == (scaled % p) >> (8 * h) & 0xFF
    assert t.f == tuple(-(-c * 2**t.u // q) for c in crt)
    assert t.g == tuple(t.z * ((-t.y * q) % TOY_BETA) % p for p in t.basis_p.moduli)


def test_toy_shift_widths_and_slack_bound(toy_full, toy_compact):
    assert toy_compact.u == 7
    assert toy_full.u == 21
    assert toy_full.slack_bound == 48


def test_residue_bytes_are_little_endian():
    basis = RnsBasis.from_moduli([0x01020305])
    parts = lazy.byte_decompose(RnsVector.of([0x01020304], basis))
    assert parts.tolist() == [[4, 3, 2, 1]]


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_byte_merge_undoes_byte_decompose(bn254_tables, data):
    basis = bn254_tables.basis_q
    v = RnsVector.of([data.draw(modint(q)) for q in basis.moduli], basis)
    assert lazy.byte_merge(lazy.byte_decompose(v), basis) == v


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_byte_products_accumulate_without_carry(bn254_tables, data):
    basis = bn254_tables.basis_q
    residues = np.array([[data.draw(modint(q)) for q in basis.moduli]], dtype=np.uint64)
    x_bytes = lazy.byte_decompose_batch(residues)
    acc = x_bytes.astype(np.uint64) @ bn254_tables.e.astype(np.uint64)
    exact = [sum(int(x) * int(e) for x, e in zip(x_bytes[0], col, strict=True)) for col in bn254_tables.e.T]
    assert acc[0].tolist() == exact
    assert max(exact) < 1 << lazy.ACCUMULATOR_BITS

    # bumping one input byte moves only the columns its table row touches
    row = data.draw(st.integers(min_value=0, max_value=x_bytes.shape[1] - 1))
    bumped = x_bytes.copy()
    bumped[0, row] ^= 1
    delta = (bumped.astype(np.int64) @ bn254_tables.e.astype(np.int64)) - acc.astype(np.int64)
    expected = (int(bumped[0, row]) - int(x_bytes[0, row])) * bn254_tables.e[row].astype(np.int64)
    assert np.array_equal(delta[0], expected)


def test_wide_field_accumulator_stays_in_32_bits(wide_tables):
    rows = wide_tables.e.shape[0]
    assert rows * 0xFF * 0xFF < 1 << lazy.ACCUMULATOR_BITS
    worst = np.full((1, rows), 0xFF, dtype=np.uint64) @ wide_tables.e.astype(np.uint64)
    assert int(worst.max()) < 1 << lazy.ACCUMULATOR_BITS


@settings(max_examples=10, deadline=None)
@given(data=st.data())
def test_wide_field_modmul_is_congruent(wide_tables, data):
    beta = wide_tables.beta
    a = data.draw(modint(beta))
    b = data.draw(modint(beta))
    out = lazy.modmul_lazy(lazy.encode(a, wide_tables), lazy.encode(b, wide_tables), wide_tables, check_bounds=True)
    assert lazy.normalize_to_canonical(out, wide_tables).value == a * b % beta
