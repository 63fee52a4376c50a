from __future__ import annotations

import itertools
import random

import pytest

from kernels.backends import get_backend
from kernels.counters import counting
from kernels.edwards import CurveParams, TwistedEdwardsCurve, is_square, search_small_curve
from kernels.field import PrimeField
from utilities.errors import ConfigurationError, DomainError


@pytest.fixture(scope="module")
def toy_points(toy13) -> list[tuple[int, int]]:
    return list(toy13.enumerate_points())


def test_small_curve_search():
    assert search_small_curve(13) == (1, 2)
    assert search_small_curve(5) == (1, 2)
    a, d = search_small_curve(97)
    assert is_square(a, 97)
    assert not is_square(d, 97)


@pytest.mark.parametrize(
    "a, d",
    [(0, 2), (2, 2), (1, 4), (1, 0)],
)
def test_rejected_coefficients(a, d):
    field = PrimeField.create(13)
    with pytest.raises(ConfigurationError):
        CurveParams.create(field, a, d, name="bad")


def test_generator_must_lie_on_the_curve():
    field = PrimeField.create(13)
    with pytest.raises(ConfigurationError):
        CurveParams.create(field, 1, 2, name="bad", generator=(1, 1))


def test_toy_group_order_is_a_multiple_of_four(toy_points):
    assert len(toy_points) % 4 == 0
    assert (0, 1) in toy_points


def test_unified_addition_matches_affine_law(toy13, toy_points):
    for p, q in itertools.product(toy_points, repeat=2):
        total = toy13.padd(toy13.lift(*p), toy13.lift(*q))
        assert toy13.is_on_curve(total)
        assert toy13.to_affine(total) == toy13.params.affine_add(p, q)


def test_doubling_agrees_with_addition(toy13, toy_points):
    for p in toy_points:
        point = toy13.lift(*p)
        assert toy13.eq_points(toy13.pdbl(point), toy13.padd(point, point))


def test_identity_and_negation(toy13, toy_points):
    identity = toy13.identity()
    for p in toy_points:
        point = toy13.lift(*p)
        assert toy13.eq_points(toy13.padd(point, identity), point)
        assert toy13.eq_points(toy13.padd(point, toy13.negate(point)), identity)


def test_low_order_points(toy13):
    two_torsion = toy13.lift(0, 12)
    assert toy13.eq_points(toy13.pdbl(two_torsion), toy13.identity())
    four_torsion = toy13.lift(1, 0)
    assert not toy13.eq_points(toy13.pdbl(four_torsion), toy13.identity())
    assert toy13.eq_points(toy13.scalar_mul_oracle(4, four_torsion), toy13.identity())


def test_group_order_annihilates_every_point(toy13, toy_points):
    order = len(toy_points)
    for p in toy_points:
        assert toy13.eq_points(toy13.scalar_mul_oracle(order, toy13.lift(*p)), toy13.identity())


def test_scaled_coordinates_are_the_same_point(toy13, rng):
    point = toy13.random_point(rng)
    scaled = toy13.scale(point, 5)
    assert toy13.is_on_curve(scaled)
    assert toy13.eq_points(point, scaled)
    assert toy13.to_affine(scaled) == toy13.to_affine(point)


def test_random_points_are_reproducible(toy13):
    first = [toy13.to_affine(toy13.random_point(random.Random(9))) for _ in range(3)]
    second = [toy13.to_affine(toy13.random_point(random.Random(9))) for _ in range(3)]
    assert first == second


def test_ed25519_generator_has_the_declared_order(ed25519):
    g = ed25519.generator()
    assert ed25519.is_on_curve(g)
    assert ed25519.eq_points(ed25519.scalar_mul_oracle(ed25519.params.order, g), ed25519.identity())
    assert not ed25519.eq_points(ed25519.scalar_mul_oracle(ed25519.params.order - 1, g), ed25519.identity())


def test_ed25519_addition_matches_affine_law(ed25519, rng):
    for _ in range(10):
        p, q = ed25519.random_point(rng), ed25519.random_point(rng)
        expected = ed25519.params.affine_add(ed25519.to_affine(p), ed25519.to_affine(q))
        assert ed25519.to_affine(ed25519.padd(p, q)) == expected
        doubled = ed25519.params.affine_add(ed25519.to_affine(p), ed25519.to_affine(p))
        assert ed25519.to_affine(ed25519.pdbl(p)) == doubled


@pytest.mark.parametrize("name", ["radix-mont", "rns-lazy"])
def test_backends_agree_with_oracle(toy13, name, rng):
    curve = TwistedEdwardsCurve(toy13.params, get_backend(name, toy13.params.field, seed=2))
    for _ in range(5):
        x, y = toy13.to_affine(toy13.random_point(rng))
        s = rng.randrange(1 << toy13.params.scalar_bits)
        got = curve.scalar_mul_oracle(s, curve.lift(x, y))
        assert curve.is_on_curve(got)
        assert curve.to_affine(got) == toy13.to_affine(toy13.scalar_mul_oracle(s, toy13.lift(x, y)))


def test_rns_backend_on_ed25519(ed25519, rng):
    curve = TwistedEdwardsCurve(ed25519.params, get_backend("rns-lazy", ed25519.params.field, check_bounds=True))
    p = ed25519.random_point(rng)
    q = ed25519.random_point(rng)
    lifted_p, lifted_q = curve.lift(*ed25519.to_affine(p)), curve.lift(*ed25519.to_affine(q))
    total = curve.padd(curve.pdbl(lifted_p), lifted_q)
    assert curve.to_affine(total) == ed25519.to_affine(ed25519.padd(ed25519.pdbl(p), q))


def test_operation_counts(toy13):
    p = toy13.lift(1, 0)
    with counting() as counts:
        toy13.padd(p, p)
        toy13.pdbl(p)
    assert counts.padd == 1
    assert counts.pdbl == 1


def test_off_curve_points_are_rejected(toy13):
    with pytest.raises(DomainError):
        toy13.lift(1, 1)


def test_points_stay_on_their_curve(toy13, ed25519):
    with pytest.raises(ConfigurationError):
        ed25519.padd(ed25519.identity(), toy13.identity())


def test_backend_field_must_match(toy13, bn254):
    with pytest.raises(ConfigurationError):
        TwistedEdwardsCurve(toy13.params, get_backend("oracle", bn254))


def test_missing_generator(toy13):
    with pytest.raises(ConfigurationError):
        toy13.generator()


def test_negative_scalar(toy13):
    with pytest.raises(DomainError):
        toy13.scalar_mul_oracle(-1, toy13.identity())


def test_large_fields_are_not_enumerated(ed25519):
    with pytest.raises(DomainError):
        next(ed25519.enumerate_points())
