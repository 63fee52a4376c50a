from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from kernels import bigt
from kernels.backends import get_backend
from kernels.counters import counting
from kernels.edwards import TwistedEdwardsCurve
from kernels.msm import (
    MsmInstance,
    bucket_accumulate,
    bucket_reduce_running,
    bucket_reduce_tree,
    bucketize,
    msm,
    msm_naive,
    random_instance,
    slice_scalars,
    window_merge,
)
from utilities.errors import DomainError


def _weighted_sum(curve, buckets):
    expected = curve.identity()
    for j, point in enumerate(buckets):
        expected = curve.padd(expected, curve.scalar_mul_oracle(j, point))
    return expected


@pytest.mark.parametrize("size, c", [(1, 1), (1, 8), (5, 2), (16, 3), (16, 4), (33, 8)])
def test_msm_matches_double_and_add(toy13, size, c):
    instance = random_instance(toy13, size, c, random.Random(size * 31 + c))
    expected = toy13.to_affine(msm_naive(instance))
    assert toy13.to_affine(msm(instance)) == expected
    assert toy13.to_affine(msm(instance, reduce="running")) == expected


def test_msm_on_ed25519(ed25519):
    instance = random_instance(ed25519, 6, 4, random.Random(1), scalar_bits=32)
    assert ed25519.eq_points(msm(instance), msm_naive(instance))


@pytest.mark.parametrize("name", ["radix-mont", "rns-lazy"])
def test_msm_on_other_backends(toy13, name):
    oracle_instance = random_instance(toy13, 4, 2, random.Random(4))
    curve = TwistedEdwardsCurve(toy13.params, get_backend(name, toy13.params.field, seed=3))
    points = [curve.lift(*toy13.to_affine(p)) for p in oracle_instance.points]
    instance = MsmInstance.create(oracle_instance.scalars, points, curve, window_bits=2)
    assert curve.to_affine(msm(instance)) == toy13.to_affine(msm_naive(oracle_instance))


def test_zero_scalars_sum_to_identity(toy13, rng):
    points = [toy13.random_point(rng) for _ in range(4)]
    instance = MsmInstance.create([0] * 4, points, toy13, window_bits=3)
    assert toy13.eq_points(msm(instance), toy13.identity())


def test_threaded_windows_give_the_same_sum_and_counts(toy13):
    instance = random_instance(toy13, 12, 2, random.Random(7))
    with counting() as serial_counts:
        serial = msm(instance)
    with ThreadPoolExecutor(max_workers=3) as pool, counting() as pooled_counts:
        pooled = msm(instance, executor=pool)
    assert toy13.eq_points(serial, pooled)
    assert serial_counts.as_dict() == pooled_counts.as_dict()


def test_slice_scalars_reassembles(toy13):
    scalars = [0b1011_0110, 0xFF, 0]
    instance = MsmInstance.create(scalars, [toy13.identity()] * 3, toy13, window_bits=3, scalar_bits=8)
    windows = slice_scalars(instance)
    assert windows.shape == (3, 3)
    assert int(windows.max()) < 8
    for n, s in enumerate(scalars):
        assert sum(int(windows[i, n]) << (i * 3) for i in range(3)) == s


def test_bucketize_presorts_every_window(toy13, rng):
    instance = random_instance(toy13, 20, 3, rng)
    slices = slice_scalars(instance)
    assert slices.shape == (instance.windows, instance.size)
    tensor = bucketize(instance)
    assert len(tensor.windows) == instance.windows
    for window, values in zip(tensor.windows, slices, strict=True):
        assert window.rows.shape[0] == 1 << 3
        assert np.array_equal(window.occupancy, np.bincount(values.astype(np.int64), minlength=8))
        assert np.all(np.diff(values[window.order].astype(np.int64)) >= 0)
        assert window.width == int(window.occupancy.max())
        for j in range(8):
            members = [n for n in window.order if values[n] == j]
            filled = window.rows[j][: window.occupancy[j]]
            assert [toy13.to_affine(p) for p in filled] == [toy13.to_affine(instance.points[n]) for n in members]
            for pad in window.rows[j][window.occupancy[j] :]:
                assert toy13.eq_points(pad, toy13.identity())
    assert tensor.occupied == sum(int(w.occupancy[1:].sum()) for w in tensor.windows)


def test_accumulation_is_lock_step(toy13, rng):
    instance = random_instance(toy13, 10, 2, rng)
    window = bucketize(instance).windows[0]
    with counting() as counts:
        sums = bucket_accumulate(window, toy13)
    assert counts.padd == (2**2 - 1) * window.width
    assert counts.padd_occupied == int(window.occupancy[1:].sum())
    assert toy13.eq_points(sums[0], toy13.identity())


@pytest.mark.parametrize("c", [1, 2, 3, 4])
def test_bucket_reductions_compute_the_weighted_sum(toy13, rng, c):
    buckets = [toy13.random_point(rng) for _ in range(1 << c)]
    expected = _weighted_sum(toy13, buckets)
    assert toy13.eq_points(bucket_reduce_tree(buckets, toy13), expected)
    assert toy13.eq_points(bucket_reduce_running(buckets, toy13), expected)


def test_tree_reduction_needs_power_of_two(toy13):
    with pytest.raises(DomainError):
        bucket_reduce_tree([toy13.identity()] * 3, toy13)


@pytest.mark.parametrize("kernel, reduce", [("presort-ppg", bucket_reduce_running), ("ls-ppg", bucket_reduce_tree)])
@pytest.mark.parametrize("k, c", [(1, 1), (2, 3), (4, 2)])
def test_reduction_counts_match_the_model(toy13, rng, kernel, reduce, k, c):
    windows = [[toy13.random_point(rng) for _ in range(1 << c)] for _ in range(k)]
    expected = bigt.expected_counts(bigt.KernelConfig(kernel=kernel, n=1, k=k, c=c))
    _, report = bigt.measure_counts(lambda: window_merge([reduce(w, toy13) for w in windows], c, toy13), expected)
    assert report.consistent, (report.counts, report.expected)


@pytest.mark.parametrize(
    "scalars, points, c, bits",
    [
        ([], 0, 2, 8),
        ([1, 2], 1, 2, 8),
        ([1], 1, 0, 8),
        ([1], 1, 9, 8),
        ([256], 1, 2, 8),
        ([-1], 1, 2, 8),
    ],
)
def test_invalid_instances(toy13, scalars, points, c, bits):
    with pytest.raises(DomainError):
        MsmInstance.create(scalars, [toy13.identity()] * points, toy13, window_bits=c, scalar_bits=bits)


def test_window_count(toy13):
    instance = MsmInstance.create([5], [toy13.identity()], toy13, window_bits=3, scalar_bits=8)
    assert instance.windows == 3
    assert instance.size == 1
