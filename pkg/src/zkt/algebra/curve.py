"""Pairing groups over BN254 through a thin ctypes layer on the mcl library.

``G1`` and ``G2`` are the source groups, written additively. ``GT`` is the
target group, also written additively: ``a + b`` is the field-12 product and
``k * a`` is exponentiation. That keeps pairing equations looking like the
linear relations they encode.

The backend is chosen by the ``ZKT_CURVE`` environment variable. Only
``bn254`` ships, but a new entry in ``CURVES`` is all a replacement needs.
"""

from __future__ import annotations

import ctypes
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import ConfigurationError, FormatError
from .field import MODULUS


@dataclass(frozen=True)
class CurveParams:
    name: str
    mcl_id: int
    scalar_modulus: int
    g1_generator: str
    g2_generator: str
    g1_bytes: int
    g2_bytes: int
    gt_bytes: int


CURVES: dict[str, CurveParams] = {
    "bn254": CurveParams(
        name="bn254",
        mcl_id=4,  # BN_SNARK1: the alt_bn128 curve used by Ethereum precompiles
        scalar_modulus=MODULUS,
        g1_generator="1 1 2",
        g2_generator=(
            "1 10857046999023057135944570762232829481370756359578518086990519993285655852781"
            " 11559732032986387107991004021392285783925812861821192530917403151452391805634"
            " 8495653923123431417604973247489272438418190587263600148770280649306958101930"
            " 4082367875863433681332203403145435568316851327593401208105741076214120093531"
        ),
        g1_bytes=32,
        g2_bytes=64,
        gt_bytes=384,
    ),
}

_FrRaw = ctypes.c_uint64 * 4
_G1Raw = ctypes.c_uint64 * 12
_G2Raw = ctypes.c_uint64 * 24
_GTRaw = ctypes.c_uint64 * 48


def _load(params: CurveParams):
    try:
        from mclbn256 import mclbn256 as _m
    except ImportError as exc:  # pragma: no cover
        raise ConfigurationError("the mclbn256 package is required for curve arithmetic") from exc
    lib = _m.loaded_libraries["libmclbn256"]
    if lib.mclBn_init(params.mcl_id, _m.MCLBN_COMPILED_TIME_VAR) != 0:
        raise ConfigurationError(f"mcl failed to initialise curve {params.name}")
    lib.mclBn_verifyOrderG2(1)
    for fn in ("mclBnG1_serialize", "mclBnG2_serialize", "mclBnGT_serialize",
               "mclBnG1_deserialize", "mclBnG2_deserialize", "mclBnGT_deserialize"):
        getattr(lib, fn).restype = ctypes.c_size_t
    return lib


CURVE = CURVES.get(os.environ.get("ZKT_CURVE", "bn254"))
if CURVE is None:
    raise ConfigurationError(f"unknown curve {os.environ.get('ZKT_CURVE')!r}; known: {sorted(CURVES)}")
_lib = _load(CURVE)
R = CURVE.scalar_modulus


def _fr(x: int) -> _FrRaw:
    a = _FrRaw()
    _lib.mclBnFr_setLittleEndianMod(a, (x % R).to_bytes(32, "little"), 32)
    return a


def _fr_array(xs: Sequence[int]):
    arr = (_FrRaw * len(xs))()
    for i, x in enumerate(xs):
        _lib.mclBnFr_setLittleEndianMod(arr[i], (x % R).to_bytes(32, "little"), 32)
    return arr


class _Point:
    """Shared implementation for the two source groups."""

    __slots__ = ("_p",)
    _Raw: type
    _pre: str
    _nbytes: int
    _gen_str: str

    def __init__(self, raw=None):
        self._p = raw if raw is not None else self._Raw()

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def generator(cls):
        g = cls()
        s = cls._gen_str.encode()
        if getattr(_lib, cls._pre + "setStr")(g._p, s, len(s), 10) != 0:
            raise ConfigurationError("bad generator encoding")
        return g

    @classmethod
    def hash_to(cls, msg: bytes):
        out = cls()
        if getattr(_lib, cls._pre + "hashAndMapTo")(out._p, msg, len(msg)) != 0:
            raise ConfigurationError("hash-to-curve failed")
        return out

    def __add__(self, other):
        out = type(self)()
        getattr(_lib, self._pre + "add")(out._p, self._p, other._p)
        return out

    def __sub__(self, other):
        out = type(self)()
        getattr(_lib, self._pre + "sub")(out._p, self._p, other._p)
        return out

    def __neg__(self):
        out = type(self)()
        getattr(_lib, self._pre + "neg")(out._p, self._p)
        return out

    def __mul__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        out = type(self)()
        getattr(_lib, self._pre + "mul")(out._p, self._p, _fr(k))
        return out

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and getattr(_lib, self._pre + "isEqual")(self._p, other._p) == 1

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def is_zero(self) -> bool:
        return getattr(_lib, self._pre + "isZero")(self._p) == 1

    def to_bytes(self) -> bytes:
        buf = ctypes.create_string_buffer(self._nbytes)
        n = getattr(_lib, self._pre + "serialize")(buf, self._nbytes, self._p)
        if n != self._nbytes:
            raise FormatError("point serialisation failed")
        return buf.raw

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) != cls._nbytes:
            raise FormatError(f"{cls.__name__} encoding must be {cls._nbytes} bytes")
        out = cls()
        n = getattr(_lib, cls._pre + "deserialize")(out._p, data, len(data))
        if n != cls._nbytes or getattr(_lib, cls._pre + "isValid")(out._p) != 1:
            raise FormatError(f"invalid {cls.__name__} point encoding")
        return out

    def __reduce__(self):
        return (type(self).from_bytes, (self.to_bytes(),))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_bytes().hex()[:16]}...)"


class G1(_Point):
    __slots__ = ()
    _Raw = _G1Raw
    _pre = "mclBnG1_"
    _nbytes = CURVE.g1_bytes
    _gen_str = CURVE.g1_generator


class G2(_Point):
    __slots__ = ()
    _Raw = _G2Raw
    _pre = "mclBnG2_"
    _nbytes = CURVE.g2_bytes
    _gen_str = CURVE.g2_generator


_G1_GEN = G1.generator()
_G2_GEN = G2.generator()
G1.generator = classmethod(lambda cls: _G1_GEN)  # type: ignore[assignment]
G2.generator = classmethod(lambda cls: _G2_GEN)  # type: ignore[assignment]


class GT:
    """Target group element, written additively."""

    __slots__ = ("_p",)
    _nbytes = CURVE.gt_bytes

    def __init__(self, raw=None):
        if raw is None:
            raw = _GTRaw()
            _lib.mclBnGT_setInt(raw, 1)
        self._p = raw

    @classmethod
    def zero(cls) -> "GT":
        return cls()

    def __add__(self, other: "GT") -> "GT":
        out = _GTRaw()
        _lib.mclBnGT_mul(out, self._p, other._p)
        return GT(out)

    def __sub__(self, other: "GT") -> "GT":
        out = _GTRaw()
        _lib.mclBnGT_div(out, self._p, other._p)
        return GT(out)

    def __neg__(self) -> "GT":
        out = _GTRaw()
        _lib.mclBnGT_inv(out, self._p)
        return GT(out)

    def __mul__(self, k: int) -> "GT":
        if not isinstance(k, int):
            return NotImplemented
        k %= R
        if k == 0:
            return GT()
        if k == 1:
            return self
        out = _GTRaw()
        _lib.mclBnGT_pow(out, self._p, _fr(k))
        return GT(out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, GT) and _lib.mclBnGT_isEqual(self._p, other._p) == 1

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def is_zero(self) -> bool:
        return _lib.mclBnGT_isOne(self._p) == 1

    def to_bytes(self) -> bytes:
        buf = ctypes.create_string_buffer(self._nbytes)
        n = _lib.mclBnGT_serialize(buf, self._nbytes, self._p)
        if n != self._nbytes:
            raise FormatError("target-group serialisation failed")
        return buf.raw

    @classmethod
    def from_bytes(cls, data: bytes) -> "GT":
        if len(data) != cls._nbytes:
            raise FormatError(f"GT encoding must be {cls._nbytes} bytes")
        raw = _GTRaw()
        if _lib.mclBnGT_deserialize(raw, data, len(data)) != cls._nbytes:
            raise FormatError("invalid GT encoding")
        return cls(raw)

    def __reduce__(self):
        return (GT.from_bytes, (self.to_bytes(),))

    def __repr__(self) -> str:
        return f"GT({self.to_bytes().hex()[:16]}...)"


def msm(points: Sequence[_Point], scalars: Sequence[int]):
    """Multi-scalar multiplication sum(s_i * P_i) in G1 or G2."""
    if len(points) != len(scalars):
        raise ValueError("msm: length mismatch")
    if not points:
        raise ValueError("msm: empty input (group unknown)")
    cls = type(points[0])
    n = len(points)
    pts = (cls._Raw * n)()
    for i, p in enumerate(points):
        pts[i] = p._p
    out = cls()
    getattr(_lib, cls._pre + "mulVec")(out._p, pts, _fr_array(scalars), n)
    return out


def msm_raw(cls, point_array, scalars: Sequence[int], offset: int = 0):
    """MSM against a pre-packed ctypes point array (avoids repacking large bases)."""
    n = len(scalars)
    out = cls()
    if n == 0:
        return out
    base = ctypes.byref(point_array, offset * ctypes.sizeof(cls._Raw))
    getattr(_lib, cls._pre + "mulVec")(out._p, base, _fr_array(scalars), n)
    return out


def pack_points(points: Sequence[_Point]):
    cls = type(points[0])
    arr = (cls._Raw * len(points))()
    for i, p in enumerate(points):
        arr[i] = p._p
    return arr


def pairing(p: G1, q: G2) -> GT:
    out = _GTRaw()
    _lib.mclBn_pairing(out, p._p, q._p)
    return GT(out)


def multi_pairing(pairs: Iterable[tuple[G1, G2]]) -> GT:
    """Product of pairings with a single final exponentiation."""
    pairs = [(p, q) for p, q in pairs if not p.is_zero() and not q.is_zero()]
    if not pairs:
        return GT()
    n = len(pairs)
    ps = (_G1Raw * n)()
    qs = (_G2Raw * n)()
    for i, (p, q) in enumerate(pairs):
        ps[i] = p._p
        qs[i] = q._p
    ml = _GTRaw()
    _lib.mclBn_millerLoopVec(ml, ps, qs, n)
    out = _GTRaw()
    _lib.mclBn_finalExp(out, ml)
    return GT(out)


def g1_generator() -> G1:
    return _G1_GEN


def g2_generator() -> G2:
    return _G2_GEN
