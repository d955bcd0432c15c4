"""Strict tagged binary codec for proof material.

Every value carries a one-byte tag. Decoding is canonical: an encoding that
does not re-encode to the same bytes (leading zero bytes, unsorted dict keys,
non-canonical points, field values out of range) is a FormatError, as are
truncation and trailing bytes.
"""

from __future__ import annotations

import struct
from typing import Any

from ..accumulation.accumulator import AccInstance
from ..algebra.curve import CURVE, G1, G2, GT
from ..blocks.base import BlockKind, BlockProof
from ..errors import FormatError
from ..iop.core import IopProof

MAX_LEN = 1 << 28

_POINTS = {b"g": (G1, CURVE.g1_bytes), b"h": (G2, CURVE.g2_bytes), b"t": (GT, CURVE.gt_bytes)}


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def _int(v: int) -> bytes:
    sign = b"-" if v < 0 else b"+"
    mag = abs(v)
    body = mag.to_bytes((mag.bit_length() + 7) // 8, "big")
    return b"i" + sign + _u32(len(body)) + body


def encode(item: Any) -> bytes:
    if item is None:
        return b"N"
    if isinstance(item, bool):
        return b"T" if item else b"F"
    if isinstance(item, BlockKind):
        return encode(item.value)
    if isinstance(item, int):
        return _int(item)
    if isinstance(item, bytes):
        return b"y" + _u32(len(item)) + item
    if isinstance(item, str):
        data = item.encode()
        return b"s" + _u32(len(data)) + data
    if isinstance(item, G1):
        return b"g" + item.to_bytes()
    if isinstance(item, G2):
        return b"h" + item.to_bytes()
    if isinstance(item, GT):
        return b"t" + item.to_bytes()
    if isinstance(item, BlockProof):
        return b"P" + b"".join(encode(v) for v in (item.kind.value, item.static, item.pi, item.g1, item.g2,
                                                    item.challenges, item.payload))
    if isinstance(item, IopProof):
        return b"I" + b"".join(encode(v) for v in (item.F, item.Bl, item.Q, item.at_zeta, item.at_wzeta,
                                                    item.q_at_zeta, item.h1, item.h2))
    if isinstance(item, AccInstance):
        return b"A" + b"".join(encode(v) for v in (item.kind.value, item.static, item.pi, item.g1, item.g2,
                                                    item.challenges, item.E, item.mu, item.b))
    if isinstance(item, dict):
        keys = sorted(item)
        if any(not isinstance(k, str) for k in keys):
            raise TypeError("codec dict keys must be strings")
        return b"d" + _u32(len(keys)) + b"".join(encode(k) + encode(item[k]) for k in keys)
    if isinstance(item, (list, tuple)):
        return b"l" + _u32(len(item)) + b"".join(encode(v) for v in item)
    raise TypeError(f"codec cannot encode {type(item).__name__}")


class Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError(f"truncated input at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        n = struct.unpack("<I", self.take(4))[0]
        if n > MAX_LEN:
            raise FormatError(f"length {n} at byte {self.pos - 4} is implausible")
        return n

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")

    # typed readers --------------------------------------------------------------

    def item(self) -> Any:
        tag = self.take(1)
        if tag == b"N":
            return None
        if tag in (b"T", b"F"):
            return tag == b"T"
        if tag == b"i":
            sign = self.take(1)
            body = self.take(self.u32())
            if sign not in (b"+", b"-") or (body and body[0] == 0) or (sign == b"-" and not body):
                raise FormatError("non-canonical integer")
            v = int.from_bytes(body, "big")
            return -v if sign == b"-" else v
        if tag == b"y":
            return self.take(self.u32())
        if tag == b"s":
            try:
                return self.take(self.u32()).decode()
            except UnicodeDecodeError:
                raise FormatError("invalid utf-8 string") from None
        if tag in _POINTS:
            cls, size = _POINTS[tag]
            raw = self.take(size)
            try:
                pt = cls.from_bytes(raw)
            except (ValueError, FormatError) as exc:
                raise FormatError(f"invalid {cls.__name__} element: {exc}") from None
            if pt.to_bytes() != raw:
                raise FormatError(f"non-canonical {cls.__name__} encoding")
            return pt
        if tag == b"l":
            return tuple(self.item() for _ in range(self.u32()))
        if tag == b"d":
            out, prev = {}, None
            for _ in range(self.u32()):
                k = self.item()
                if not isinstance(k, str) or (prev is not None and k <= prev):
                    raise FormatError("dict keys must be strictly increasing strings")
                prev = k
                out[k] = self.item()
            return out
        if tag == b"P":
            kind, static, pi, g1, g2, ch, payload = (self.item() for _ in range(7))
            return BlockProof(_kind(kind), _static(static), _ints(pi), _pts(g1, G1), _pts(g2, G2), _ints(ch), payload)
        if tag == b"I":
            F, Bl, Q, az, awz, qz, h1, h2 = (self.item() for _ in range(8))
            if not isinstance(h1, G1) or not isinstance(h2, G1):
                raise FormatError("IOP opening proofs must be G1 elements")
            return IopProof(_pts(F, G1), _pts(Bl, G1), _pts(Q, G1), _ints(az), _ints(awz), _ints(qz), h1, h2)
        if tag == b"A":
            kind, static, pi, g1, g2, ch, E, mu, b = (self.item() for _ in range(9))
            return AccInstance(_kind(kind), _static(static), _ints(pi), _pts(g1, G1), _pts(g2, G2), _ints(ch),
                               _pts(E, GT), _field(mu), _field(b))
        raise FormatError(f"unknown tag {tag!r} at byte {self.pos - 1}")


def _kind(v) -> BlockKind:
    try:
        return BlockKind(v)
    except ValueError:
        raise FormatError(f"unknown block kind {v!r}") from None


def _field(v) -> int:
    from ..algebra.field import MODULUS

    if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < MODULUS:
        raise FormatError("expected a canonical field element")
    return v


def _ints(v) -> tuple[int, ...]:
    if not isinstance(v, tuple):
        raise FormatError("expected a list of field elements")
    return tuple(_field(x) for x in v)


def _pts(v, cls) -> tuple:
    if not isinstance(v, tuple) or any(not isinstance(x, cls) for x in v):
        raise FormatError(f"expected a list of {cls.__name__} elements")
    return v


def _static(v) -> tuple:
    if not isinstance(v, tuple) or any(not (isinstance(p, tuple) and len(p) == 2 and isinstance(p[0], str))
                                       for p in v):
        raise FormatError("malformed static parameters")
    return v


def decode(data: bytes) -> Any:
    r = Reader(data)
    out = r.item()
    r.done()
    return out
