"""Loaders for the shipped parameter files.

Fields, curves and hardware profiles live as TOML under ``<root>/<paths.params>/`` in the
``fields``, ``curves`` and ``profiles`` subdirectories, one file per name. Integers that do not
fit TOML's 64-bit range are written as hex strings.
"""

from __future__ import annotations

import functools
from logging import getLogger
from pathlib import Path

import msgspec

from kernels.bigt import HardwareProfile
from kernels.edwards import CurveParams
from kernels.field import PrimeField
from utilities.errors import ConfigurationError, ConstructionError, ParameterFileError

__all__ = ("CurveFile", "FieldFile", "available", "load_curve", "load_field", "load_profile")

log = getLogger(__name__)


class Base(msgspec.Struct, forbid_unknown_fields=True): ...


class FieldFile(Base):
    name: str
    modulus: str
    two_adicity: int | None = None
    description: str = ""


class CurveFile(Base):
    name: str
    field: str
    a: str
    d: str
    generator_x: str | None = None
    generator_y: str | None = None
    order: str | None = None
    scalar_bits: int | None = None
    description: str = ""


def _hex(text: str, path: Path, key: str) -> int:
    try:
        return int(text, 16)
    except ValueError:
        raise ParameterFileError(str(path), f"{key} is not hex: {text!r}") from None


def _read[T](path: Path, type_: type[T]) -> T:
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ParameterFileError(str(path), "no such parameter file") from None
    try:
        return msgspec.toml.decode(data, type=type_)
    except (msgspec.DecodeError, msgspec.ValidationError) as exc:
        raise ParameterFileError(str(path), str(exc)) from exc


def available(params_root: str | Path, kind: str) -> list[str]:
    """Names of the parameter files of one kind."""
    return sorted(p.stem for p in (Path(params_root) / kind).glob("*.toml"))


@functools.cache
def load_field(params_root: str | Path, name: str) -> PrimeField:
    """Load and validate a prime field.

    Raises:
        ParameterFileError: If the file is missing, malformed, not prime, or its declared
            2-adicity is wrong.
    """
    path = Path(params_root) / "fields" / f"{name}.toml"
    raw = _read(path, FieldFile)
    try:
        field = PrimeField.create(_hex(raw.modulus, path, "modulus"), name=raw.name)
    except ConstructionError as exc:
        raise ParameterFileError(str(path), str(exc)) from exc
    if raw.two_adicity is not None and raw.two_adicity != field.two_adicity:
        raise ParameterFileError(str(path), f"declared 2-adicity {raw.two_adicity}, actual {field.two_adicity}")
    log.debug(f"Loaded field {name} from {path}")
    return field


@functools.cache
def load_curve(params_root: str | Path, name: str) -> CurveParams:
    """Load and validate twisted Edwards curve parameters.

    Raises:
        ParameterFileError: If the file is missing or malformed, or its coefficients are rejected.
    """
    path = Path(params_root) / "curves" / f"{name}.toml"
    raw = _read(path, CurveFile)
    field = load_field(params_root, raw.field)
    generator = None
    if raw.generator_x is not None and raw.generator_y is not None:
        generator = (_hex(raw.generator_x, path, "generator_x"), _hex(raw.generator_y, path, "generator_y"))
    try:
        return CurveParams.create(
            field,
            _hex(raw.a, path, "a"),
            _hex(raw.d, path, "d"),
            name=raw.name,
            scalar_bits=raw.scalar_bits,
            generator=generator,
            order=_hex(raw.order, path, "order") if raw.order else None,
        )
    except ConfigurationError as exc:
        raise ParameterFileError(str(path), str(exc)) from exc


@functools.cache
def load_profile(params_root: str | Path, name: str) -> HardwareProfile:
    """Load a hardware profile.

    Raises:
        ParameterFileError: If the file is missing, malformed or has non-positive parameters.
    """
    path = Path(params_root) / "profiles" / f"{name}.toml"
    try:
        return _read(path, HardwareProfile)
    except ConfigurationError as exc:
        raise ParameterFileError(str(path), str(exc)) from exc
