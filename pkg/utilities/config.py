from __future__ import annotations

from typing import Literal

import msgspec

__all__ = ("Config", "RunConfig", "decode")


class Base(msgspec.Struct, forbid_unknown_fields=True): ...


class Paths(Base):
    params: str
    vectors: str


class LazyToy(Base):
    beta: int
    moduli: list[int]
    w: int


class VerifyModmul(Base):
    fields: list[str]
    count: int


class VerifyMsm(Base):
    curves: list[str]
    sizes: list[int]
    window_bits: list[int]
    backends: list[str]
    backend_max_size: int
    scalar_bits: int | None = None


class VerifyBucketReduce(Base):
    curve: str
    window_bits: list[int]
    trials: int


class VerifyNtt(Base):
    field: str
    direct_max_log: int
    cross_max_log: int
    convolution_max_log: int
    backend_field: str
    backend_log: int


class VerifyBigT(Base):
    profile: str
    d_range: list[int]
    n_log_range: list[int]
    k_range: list[int]


class Verify(Base):
    suites: list[str]
    modmul: VerifyModmul
    msm: VerifyMsm
    bucket_reduce: VerifyBucketReduce
    ntt: VerifyNtt
    bigt: VerifyBigT


class Bench(Base):
    kernels: list[str]
    backends: list[str]
    repeats: int
    warmup: int
    modmul_field: str
    modmul_batch: int
    ntt_field: str
    ntt_log: int
    ntt_variants: list[str]
    msm_curve: str
    msm_log: int
    msm_window_bits: int


class Vectors(Base):
    modmul_fields: list[str]
    modmul_count: int
    msm_curves: list[str]
    msm_count: int
    msm_window_bits: int
    ntt_field: str
    ntt_log: int


class Analyze(Base):
    profile: str
    padd_unit: Literal["vpu", "mxu", "both"]


class Config(Base):
    seed: int
    backend: str
    workers: int
    paths: Paths
    lazy_toy: LazyToy
    verify: Verify
    bench: Bench
    vectors: Vectors
    analyze: Analyze


class RunConfig(Base):
    command: str
    seed: int
    backend: str
    out: str | None
    root: str
    config: Config


def decode(data: bytes | str) -> Config:
    """Decode a TOML document into a Config."""
    return msgspec.toml.decode(data, type=Config)
