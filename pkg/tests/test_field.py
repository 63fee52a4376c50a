from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernels import field as fc
from kernels.counters import counting
from kernels.field import FieldElement, PrimeField
from tests.strategies import modint
from utilities import params
from utilities.errors import ConfigurationError, ConstructionError, DomainError

WIDE_FIELDS = ("bn254_fr", "secp256k1_p", "bls12_377_fq", "mnt4_753_fq")


@pytest.mark.parametrize(
    "name, digits, two_adicity",
    [
        ("bn254_fr", 8, 28),
        ("secp256k1_p", 8, 1),
        ("bls12_377_fq", 12, 46),
        ("mnt4_753_fq", 24, 15),
        ("goldilocks", 2, 32),
        ("ntt_998244353", 1, 23),
        ("toy13", 1, 2),
    ],
)
def test_field_constants(params_root, name, digits, two_adicity):
    field = params.load_field(params_root, name)
    assert field.d == digits
    assert field.two_adicity == two_adicity
    assert field.mont_r == pow(2, 32 * digits, field.beta)
    assert (field.beta * field.mont_ninv + 1) % (1 << 32) == 0


@pytest.mark.parametrize("beta", [2, 4, 15, 1 << 61])
def test_create_rejects_non_prime(beta):
    with pytest.raises(ConstructionError):
        PrimeField.create(beta)


@pytest.mark.parametrize("name", WIDE_FIELDS)
@given(data=st.data())
def test_mont_mul_radix_matches_division(params_root, name, data):
    field = params.load_field(params_root, name)
    a = data.draw(modint(field.beta))
    b = data.draw(modint(field.beta))
    product = fc.mont_mul_radix(field.element(a), fc.to_montgomery(field.element(b)))
    assert product.value == a * b % field.beta
    assert product.value == fc.modmul_oracle(field.element(a), field.element(b)).value


@pytest.mark.parametrize("name", WIDE_FIELDS)
@given(data=st.data())
def test_montgomery_form_round_trips(params_root, name, data):
    field = params.load_field(params_root, name)
    a = field.element(data.draw(modint(field.beta)))
    assert fc.from_montgomery(fc.to_montgomery(a)).value == a.value


def test_mont_mul_radix_counts(bn254):
    with counting() as counts:
        fc.mont_mul_radix(bn254.element(3), bn254.element(bn254.beta - 1))
    assert counts.field_mul == 1
    assert counts.digit_mul == 2 * bn254.d**2


@given(a=modint(2**61 - 1), b=modint(2**61 - 1))
def test_lazy_add_defers_the_subtraction(a, b):
    field = PrimeField.create(2**61 - 1)
    total = fc.add_lazy(field.element(a), field.element(b))
    assert total.value == a + b
    assert total.bound == fc.LAZY_BOUND
    assert fc.normalize(total).value == (a + b) % field.beta
    assert fc.sub_mod(total, field.element(b)).value == a


def test_lazy_add_reduces_on_digit_overflow(secp256k1):
    top = secp256k1.element(secp256k1.beta - 1)
    total = fc.add_lazy(top, top)
    assert total.bound == 1
    assert total.value == secp256k1.beta - 2


@given(a=modint(2**255 - 19), b=modint(2**255 - 19))
def test_sub_and_neg(a, b):
    field = PrimeField.create(2**255 - 19)
    diff = fc.sub_mod(field.element(a), field.element(b))
    assert diff.value == (a - b) % field.beta
    assert fc.add_mod(diff, field.element(b)).value == a
    assert fc.neg_mod(field.element(a)).value == -a % field.beta


def test_from_int_rejects_out_of_range(bn254):
    with pytest.raises(DomainError):
        bn254.element(bn254.beta)
    with pytest.raises(DomainError):
        bn254.element(-1)
    assert FieldElement.from_int(bn254, bn254.beta, bound=2).bound == 2


def test_hex_is_lowercase_without_prefix(bn254):
    element = FieldElement.from_hex(bn254, "DEADbeef")
    assert element.value == 0xDEADBEEF
    assert element.to_hex() == "deadbeef"
    with pytest.raises(DomainError):
        FieldElement.from_hex(bn254, "0xzz")


def test_mixed_fields_are_rejected(bn254, secp256k1):
    with pytest.raises(ConfigurationError):
        fc.mont_mul_radix(bn254.element(1), secp256k1.element(1))
    with pytest.raises(ConfigurationError):
        fc.add_mod(bn254.element(1), secp256k1.element(1))


def test_mont_mul_radix_needs_canonical_operands(bn254):
    lazy = FieldElement.from_int(bn254, bn254.beta + 1, bound=2)
    with pytest.raises(DomainError):
        fc.mont_mul_radix(lazy, bn254.element(1))
