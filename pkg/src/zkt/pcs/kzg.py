"""KZG polynomial commitments over BN254.

Test-mode setup derives the trapdoor from a seed and keeps it in memory so
preprocessing can take shortcuts and tests can act as a simulator. The trapdoor
is never written into the SRS file itself.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ..algebra.curve import G1, G2, msm_raw, multi_pairing, pack_points
from ..algebra.field import MODULUS as P
from ..algebra.field import inv, powers
from ..algebra.poly import Polynomial
from ..errors import ConfigurationError, DegreeError, FormatError
from ..transcript import rho

SRS_MAGIC = b"ZKTSRS01"
DEFAULT_MAX_DEGREE_BUDGET = 1 << 20


def test_mode() -> bool:
    return os.environ.get("ZKT_TEST_MODE", "1") not in ("0", "false", "no", "")


def blinding_generator() -> G1:
    """Independent generator H for additive blinding (nobody knows log_G H)."""
    return G1.hash_to(b"zkt/blinding-generator/v1")


class Srs:
    """Powers of the trapdoor in both source groups."""

    def __init__(self, g1_powers: Sequence[G1], g2_powers: Sequence[G2], test_trapdoor: Optional[int] = None):
        if len(g1_powers) != len(g2_powers) or len(g1_powers) < 2:
            raise FormatError("SRS needs equal-length G1/G2 power lists of length >= 2")
        self.g1_powers = list(g1_powers)
        self.g2_powers = list(g2_powers)
        self.test_trapdoor = test_trapdoor
        self._g1_packed = pack_points(self.g1_powers)
        self._g2_packed = pack_points(self.g2_powers)
        self._digest: Optional[bytes] = None
        self.h = blinding_generator()
        self._cache: dict = {}

    @property
    def max_degree(self) -> int:
        return len(self.g1_powers) - 1

    @property
    def g1(self) -> G1:
        return self.g1_powers[0]

    @property
    def g2(self) -> G2:
        return self.g2_powers[0]

    def digest(self) -> bytes:
        if self._digest is None:
            self._digest = hashlib.sha3_256(srs_to_bytes(self)).digest()
        return self._digest

    def cached(self, key, build):
        """Memoise derived SRS material (Lagrange bases, shifted windows, ...)."""
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def commit_coeffs(self, coeffs: Sequence[int], offset: int = 0) -> G1:
        """[sum c_i tau^(i+offset)]_1, the bare commitment used inside the protocols."""
        coeffs = list(coeffs)
        while coeffs and coeffs[-1] % P == 0:
            coeffs.pop()
        if len(coeffs) + offset - 1 > self.max_degree:
            raise DegreeError(f"degree {len(coeffs) + offset - 1} exceeds SRS bound {self.max_degree}")
        if not coeffs:
            return G1.zero()
        return msm_raw(G1, self._g1_packed, coeffs, offset)

    def commit_coeffs_g2(self, coeffs: Sequence[int], offset: int = 0) -> G2:
        coeffs = list(coeffs)
        while coeffs and coeffs[-1] % P == 0:
            coeffs.pop()
        if len(coeffs) + offset - 1 > self.max_degree:
            raise DegreeError(f"degree {len(coeffs) + offset - 1} exceeds SRS bound {self.max_degree}")
        if not coeffs:
            return G2.zero()
        return msm_raw(G2, self._g2_packed, coeffs, offset)

    def g2_vanishing(self, n: int) -> G2:
        """[tau^n - 1]_2."""
        return self.cached(("zh2", n), lambda: self.g2_power(n) - self.g2)

    def g2_power(self, k: int) -> G2:
        if k > self.max_degree:
            raise DegreeError(f"[tau^{k}]_2 exceeds SRS bound {self.max_degree}")
        return self.g2_powers[k]

    def degree_shift(self, bound: int) -> int:
        """Shift s with deg(f)+s <= max_degree iff deg(f) <= bound."""
        if bound > self.max_degree:
            raise DegreeError(f"degree bound {bound} exceeds SRS bound {self.max_degree}")
        return self.max_degree - bound

    def without_trapdoor(self) -> "Srs":
        s = Srs.__new__(Srs)
        s.__dict__.update(self.__dict__)
        s.test_trapdoor = None
        s._cache = {}
        return s

    def __getstate__(self):
        return {"g1": [p.to_bytes() for p in self.g1_powers],
                "g2": [p.to_bytes() for p in self.g2_powers],
                "td": self.test_trapdoor}

    def __setstate__(self, st):
        self.__init__([G1.from_bytes(b) for b in st["g1"]], [G2.from_bytes(b) for b in st["g2"]], st["td"])


def _budget() -> int:
    return int(os.environ.get("ZKT_SRS_MAX_DEGREE", DEFAULT_MAX_DEGREE_BUDGET))


def trapdoor_from_seed(seed: bytes) -> int:
    tau = rho("SRS-trapdoor", seed)
    return tau or 1


def setup(seed: bytes, d: int) -> Srs:
    """Single-party seeded setup: deterministic for a fixed seed."""
    if d < 1:
        raise ConfigurationError("SRS degree bound must be at least 1")
    if d > _budget():
        raise ConfigurationError(f"degree bound {d} exceeds the configured budget {_budget()} (ZKT_SRS_MAX_DEGREE)")
    tau = trapdoor_from_seed(seed)
    g1, g2 = G1.generator(), G2.generator()
    pw = powers(tau, d + 1)
    return Srs([g1 * t for t in pw], [g2 * t for t in pw], tau if test_mode() else None)


def srs_to_bytes(srs: Srs) -> bytes:
    out = io.BytesIO()
    out.write(SRS_MAGIC)
    out.write(struct.pack("<Q", srs.max_degree))
    for pts in (srs.g1_powers, srs.g2_powers):
        for p in pts:
            b = p.to_bytes()
            out.write(struct.pack("<I", len(b)))
            out.write(b)
    return out.getvalue()


def srs_from_bytes(data: bytes, trapdoor: Optional[int] = None) -> Srs:
    if data[:8] != SRS_MAGIC:
        raise FormatError("not an SRS file (bad magic)")
    try:
        (d,) = struct.unpack_from("<Q", data, 8)
        pos = 16
        groups = []
        for cls in (G1, G2):
            pts = []
            for _ in range(d + 1):
                (n,) = struct.unpack_from("<I", data, pos)
                pos += 4
                pts.append(cls.from_bytes(data[pos:pos + n]))
                pos += n
            groups.append(pts)
    except struct.error as exc:
        raise FormatError(f"truncated SRS file: {exc}") from None
    if pos != len(data):
        raise FormatError("trailing bytes after SRS payload")
    srs = Srs(groups[0], groups[1])
    if trapdoor is not None and test_mode():
        if srs.g1_powers[1] != G1.generator() * trapdoor:
            raise FormatError("test trapdoor does not match SRS")
        srs.test_trapdoor = trapdoor
    return srs


@dataclass(frozen=True)
class Commitment:
    point: Union[G1, G2]
    blinder: Optional[int] = field(default=None, compare=False)

    def __add__(self, other: "Commitment") -> "Commitment":
        b = None if self.blinder is None and other.blinder is None else ((self.blinder or 0) + (other.blinder or 0)) % P
        return Commitment(self.point + other.point, b)

    def __sub__(self, other: "Commitment") -> "Commitment":
        b = None if self.blinder is None and other.blinder is None else ((self.blinder or 0) - (other.blinder or 0)) % P
        return Commitment(self.point - other.point, b)

    def __mul__(self, k: int) -> "Commitment":
        return Commitment(self.point * k, None if self.blinder is None else self.blinder * k % P)

    __rmul__ = __mul__


@dataclass(frozen=True)
class OpeningProof:
    witness_point: G1
    value: int
    point: int
    blinder: Optional[int] = None


@dataclass(frozen=True)
class BatchOpeningProof:
    witness_point: G1
    values: tuple[int, ...]
    point: int


def _as_point(com) -> G1:
    return com.point if isinstance(com, Commitment) else com


def commit(srs: Srs, f: Polynomial, blinder: Optional[int] = None) -> Commitment:
    if f.degree > srs.max_degree:
        raise DegreeError(f"degree {f.degree} exceeds SRS bound {srs.max_degree}")
    pt = srs.commit_coeffs(f.coeffs)
    if blinder is not None:
        pt = pt + srs.h * blinder
    return Commitment(pt, blinder)


def commit_g2(srs: Srs, f: Polynomial) -> Commitment:
    """Dual commitment [f(tau)]_2 to the same polynomial."""
    return Commitment(srs.commit_coeffs_g2(f.coeffs))


def open(srs: Srs, f: Polynomial, x: int, blinder: Optional[int] = None) -> OpeningProof:  # noqa: A001
    q, y = f.divmod_linear(x % P)
    if q.degree > srs.max_degree:
        raise DegreeError("quotient degree exceeds SRS bound")
    return OpeningProof(srs.commit_coeffs(q.coeffs), y, x % P, blinder)


def verify_open(srs: Srs, com, proof: OpeningProof) -> bool:
    c = _as_point(com)
    if proof.blinder is not None:
        c = c - srs.h * proof.blinder
    lhs_g2 = srs.g2_powers[1] - srs.g2 * proof.point
    rhs_g1 = c - srs.g1 * proof.value
    return multi_pairing([(proof.witness_point, lhs_g2), (-rhs_g1, srs.g2)]).is_zero()


def batch_open(srs: Srs, fs: Sequence[Polynomial], x: int, gamma: int) -> BatchOpeningProof:
    x %= P
    acc = Polynomial()
    values = []
    g = 1
    for f in fs:
        values.append(f(x))
        acc = acc + f.scale(g)
        g = g * gamma % P
    q, _ = acc.divmod_linear(x)
    return BatchOpeningProof(srs.commit_coeffs(q.coeffs), tuple(values), x)


def verify_batch(srs: Srs, coms: Sequence, proof: BatchOpeningProof, gamma: int) -> bool:
    if len(coms) != len(proof.values):
        return False
    g = 1
    combined = G1.zero()
    value = 0
    for com, y in zip(coms, proof.values):
        combined = combined + _as_point(com) * g
        value = (value + g * y) % P
        g = g * gamma % P
    lhs_g2 = srs.g2_powers[1] - srs.g2 * proof.point
    rhs_g1 = combined - srs.g1 * value
    return multi_pairing([(proof.witness_point, lhs_g2), (-rhs_g1, srs.g2)]).is_zero()


def lagrange_basis_g1(srs: Srs, n: int) -> list[G1]:
    """[L_i(tau)]_1 for the size-n domain; trapdoor shortcut in test mode."""
    from ..algebra.poly import domain_new

    def build():
        dom = domain_new(n)
        if n - 1 > srs.max_degree:
            raise DegreeError(f"Lagrange basis of size {n} exceeds SRS bound")
        if srs.test_trapdoor is not None:
            return [srs.g1 * v for v in dom.lagrange_evals(srs.test_trapdoor)]
        from .group_fft import group_ifft
        return group_ifft(srs.g1_powers[:n], dom)

    return srs.cached(("lagrange1", n), build)


def inv_or_zero(x: int) -> int:
    return inv(x) if x % P else 0


def _trapdoor_path(path: str) -> str:
    return str(path) + ".trapdoor"


def save_srs(srs: Srs, path: str) -> None:
    """Write the SRS file atomically; in test mode the trapdoor goes to a sidecar file."""
    from ..fileio import atomic_write

    atomic_write(path, srs_to_bytes(srs))
    if srs.test_trapdoor is not None and test_mode():
        atomic_write(_trapdoor_path(path), srs.test_trapdoor.to_bytes(32, "little"))


def load_srs(path: str) -> Srs:
    with builtins_open(path, "rb") as fh:
        data = fh.read()
    td = None
    side = _trapdoor_path(path)
    if test_mode() and os.path.exists(side):
        with builtins_open(side, "rb") as fh:
            td = int.from_bytes(fh.read(), "little")
    return srs_from_bytes(data, td)


import builtins as _builtins  # noqa: E402

builtins_open = _builtins.open
