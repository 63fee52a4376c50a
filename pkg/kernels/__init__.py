from . import backends, bigt, counters, edwards, field, lazy, msm, ntt, rns, vectors
from .backends import get_backend
from .counters import OpCounts, counting
from .field import FieldElement, PrimeField

__all__ = (
    "FieldElement",
    "OpCounts",
    "PrimeField",
    "backends",
    "bigt",
    "counters",
    "counting",
    "edwards",
    "field",
    "get_backend",
    "lazy",
    "msm",
    "ntt",
    "rns",
    "vectors",
)
