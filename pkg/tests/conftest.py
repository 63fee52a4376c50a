from __future__ import annotations

import random
from pathlib import Path

import pytest

from kernels.backends import get_backend
from kernels.edwards import TwistedEdwardsCurve
from kernels.field import PrimeField
from utilities import params

ROOT = Path(__file__).resolve().parent.parent
PARAMS = ROOT / "params"


@pytest.fixture(scope="session")
def params_root() -> Path:
    return PARAMS


@pytest.fixture(scope="session")
def bn254() -> PrimeField:
    return params.load_field(PARAMS, "bn254_fr")


@pytest.fixture(scope="session")
def secp256k1() -> PrimeField:
    return params.load_field(PARAMS, "secp256k1_p")


@pytest.fixture(scope="session")
def ntt_field() -> PrimeField:
    return params.load_field(PARAMS, "ntt_998244353")


@pytest.fixture(scope="session")
def small_ntt_field() -> PrimeField:
    return params.load_field(PARAMS, "ntt_7681")


@pytest.fixture(scope="session")
def toy13() -> TwistedEdwardsCurve:
    curve_params = params.load_curve(PARAMS, "toy13")
    return TwistedEdwardsCurve(curve_params, get_backend("oracle", curve_params.field))


@pytest.fixture(scope="session")
def ed25519() -> TwistedEdwardsCurve:
    curve_params = params.load_curve(PARAMS, "ed25519")
    return TwistedEdwardsCurve(curve_params, get_backend("oracle", curve_params.field))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
