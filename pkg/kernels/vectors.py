"""Golden test vector files.

A vector file is plain text: one header line ``# morph kind=<kind> key=value ...`` followed by
whitespace-separated records of lowercase hex values without prefix.

* modmul: ``a b product`` per record.
* msm: ``scalar x y`` per term, then one ``expect x y`` line with the affine sum.
* ntt: ``x <value>`` for each input index, then ``X <value>`` for each output index.
"""

from __future__ import annotations

from logging import getLogger
from typing import Literal, Sequence

import msgspec

from utilities.errors import VerificationError

__all__ = (
    "VectorFile",
    "VectorKind",
    "format_modmul",
    "format_msm",
    "format_ntt",
    "parse_vectors",
)

log = getLogger(__name__)

VectorKind = Literal["modmul", "msm", "ntt"]
HEADER_PREFIX = "# morph"
_RECORD_WIDTH = {"modmul": 3, "msm": 3}


class VectorFile(msgspec.Struct):
    kind: VectorKind
    meta: dict[str, str]
    records: list[tuple[int, ...]]
    expect: tuple[int, ...] | None = None
    inputs: list[int] = msgspec.field(default_factory=list)
    outputs: list[int] = msgspec.field(default_factory=list)


def _header(kind: str, meta: dict[str, object]) -> str:
    fields = " ".join(f"{k}={v}" for k, v in meta.items())
    return f"{HEADER_PREFIX} kind={kind} {fields}".rstrip()


def _hex(*values: int) -> str:
    return " ".join(format(v, "x") for v in values)


def format_modmul(field: str, triples: Sequence[tuple[int, int, int]]) -> str:
    """Text of a modmul vector file."""
    lines = [_header("modmul", {"field": field, "count": len(triples)})]
    lines.extend(_hex(*t) for t in triples)
    return "\n".join(lines) + "\n"


def format_msm(
    curve: str, window_bits: int, terms: Sequence[tuple[int, int, int]], expect: tuple[int, int] | None
) -> str:
    """Text of an MSM vector file; `expect` is omitted for an empty file."""
    lines = [_header("msm", {"curve": curve, "c": window_bits, "count": len(terms)})]
    lines.extend(_hex(*t) for t in terms)
    if expect is not None and terms:
        lines.append(f"expect {_hex(*expect)}")
    return "\n".join(lines) + "\n"


def format_ntt(field: str, inputs: Sequence[int], outputs: Sequence[int]) -> str:
    """Text of an NTT vector file."""
    lines = [_header("ntt", {"field": field, "n": len(inputs)})]
    lines.extend(f"x {v:x}" for v in inputs)
    lines.extend(f"X {v:x}" for v in outputs)
    return "\n".join(lines) + "\n"


def _parse_hex(token: str, source: str, record: int) -> int:
    try:
        value = int(token, 16)
    except ValueError:
        raise VerificationError("golden", f"{source}: malformed hex {token!r}", record=record) from None
    if value < 0:
        raise VerificationError("golden", f"{source}: negative value {token!r}", record=record)
    return value


def parse_vectors(text: str, *, source: str = "<vectors>") -> VectorFile:
    """Parse a vector file.

    Records are numbered from 0 in file order, not counting the header.

    Raises:
        VerificationError: On a missing header, unknown kind or malformed record, carrying the
            offending record index.
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith(HEADER_PREFIX):
        raise VerificationError("golden", f"{source}: missing '{HEADER_PREFIX}' header")
    meta = dict(part.split("=", 1) for part in lines[0][len(HEADER_PREFIX) :].split() if "=" in part)
    kind = meta.pop("kind", "")
    if kind not in ("modmul", "msm", "ntt"):
        raise VerificationError("golden", f"{source}: unknown vector kind {kind!r}")
    out = VectorFile(kind=kind, meta=meta, records=[])
    for index, line in enumerate(lines[1:]):
        tokens = line.split()
        if kind == "ntt":
            if len(tokens) != 2 or tokens[0] not in ("x", "X"):
                raise VerificationError("golden", f"{source}: expected 'x <hex>' or 'X <hex>'", record=index)
            target = out.inputs if tokens[0] == "x" else out.outputs
            target.append(_parse_hex(tokens[1], source, index))
            continue
        if kind == "msm" and tokens[0] == "expect":
            if len(tokens) != 3 or out.expect is not None:
                raise VerificationError("golden", f"{source}: malformed expect line", record=index)
            out.expect = tuple(_parse_hex(t, source, index) for t in tokens[1:])
            continue
        if len(tokens) != _RECORD_WIDTH[kind] or out.expect is not None:
            raise VerificationError("golden", f"{source}: malformed {kind} record", record=index)
        out.records.append(tuple(_parse_hex(t, source, index) for t in tokens))
    if kind == "msm" and out.records and out.expect is None:
        raise VerificationError("golden", f"{source}: msm file has no expect line", record=len(lines) - 1)
    if kind == "ntt" and len(out.inputs) != len(out.outputs):
        raise VerificationError("golden", f"{source}: {len(out.inputs)} inputs but {len(out.outputs)} outputs")
    log.debug(f"Parsed {source}: {kind}, {len(out.records) or len(out.inputs)} records")
    return out
