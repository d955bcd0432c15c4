"""CQLin: y = W·x for a fixed, preprocessed matrix W.

W is public model data, so its rows can be committed in G2 once. A random
alpha collapses the O output equations into one inner product:
``sum_o alpha^o y_o = sum_i u_i x_i`` with ``u_i = sum_o alpha^o W[o, i]``.
``[u(tau)]_2`` is a linear combination of the preprocessed row commitments.
Both inner products are proven with the same sumcheck-over-H pattern as
MatMul. This keeps every test linear in the instance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from ..algebra.curve import G2, msm
from ..algebra.field import MODULUS as P
from ..algebra.field import next_pow2, powers
from ..algebra.poly import domain_new, interpolate
from ..errors import ConfigurationError, ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from .aurora import _two_part_tests, _weight_poly, sumcheck_part, sumcheck_slots, sumcheck_values, weight_commitment_g2
from .base import BlockKind, BlockProof, KindSpec, checks_enabled, derive_challenges, make_static, register, static_get
from .common import Row, srs_consts
from .relaxed import build_testset, term


@dataclass(frozen=True)
class FixedMatrix:
    """Public matrix with O rows (outputs) and I columns (inputs), field entries."""

    rows: tuple[tuple[int, ...], ...]
    name: str = ""

    @classmethod
    def from_ints(cls, rows: Sequence[Sequence[int]], name: str = "") -> "FixedMatrix":
        return cls(tuple(tuple(v % P for v in r) for r in rows), name)

    @property
    def out_dim(self) -> int:
        return len(self.rows)

    @property
    def in_dim(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def digest(self) -> bytes:
        h = hashlib.sha3_256(b"zkt/matrix")
        h.update(self.out_dim.to_bytes(8, "little") + self.in_dim.to_bytes(8, "little"))
        for r in self.rows:
            for v in r:
                h.update(v.to_bytes(32, "little"))
        return h.digest()

    def apply(self, x: Sequence[int]) -> list[int]:
        return [sum(w * v for w, v in zip(r, x)) % P for r in self.rows]


@dataclass
class PreprocessedMatrix:
    matrix: FixedMatrix
    I: int
    O: int
    row_g2: list


def preprocess_matrix(srs: Srs, W: FixedMatrix) -> PreprocessedMatrix:
    def build():
        I, O = next_pow2(W.in_dim), next_pow2(W.out_dim)
        dom = domain_new(I)
        row_g2 = []
        for r in W.rows:
            poly = interpolate(list(r) + [0] * (I - len(r)), dom)
            row_g2.append(srs.commit_coeffs_g2(poly.coeffs))
        return PreprocessedMatrix(W, I, O, row_g2)

    return srs.cached(("matrix", W.digest()), build)


def get_preprocessed_matrix(srs: Srs, W: FixedMatrix) -> PreprocessedMatrix:
    pre = srs._cache.get(("matrix", W.digest()))
    if pre is None:
        raise ConfigurationError(f"matrix {W.name or W.digest().hex()[:12]} has not been preprocessed for this SRS")
    return pre


def cqlin_constants(srs: Srs, pre: PreprocessedMatrix, alpha: int) -> tuple[G2, G2]:
    """([u(tau)]_2, [d(tau)]_2) for the row weights alpha^o."""
    def build():
        a = powers(alpha, pre.matrix.out_dim)
        u2 = msm(pre.row_g2, a) if pre.row_g2 else G2.zero()
        d = a + [0] * (pre.O - len(a))
        return u2, weight_commitment_g2(srs, d)

    return srs.cached(("cqlin-consts", pre.matrix.digest(), alpha), build)


def cqlin_static(srs: Srs, W: FixedMatrix, alpha: int):
    pre = get_preprocessed_matrix(srs, W)
    u2, d2 = cqlin_constants(srs, pre, alpha)
    return make_static(matrix=pre.matrix.digest(), I=pre.I, O=pre.O, U2=u2, D2=d2)


def _slots(static):
    I, O = static_get(static, "I"), static_get(static, "O")
    return ("x", "y") + sumcheck_slots("L", I) + sumcheck_slots("R", O, False)


def _tests(static, srs):
    I, O = static_get(static, "I"), static_get(static, "O")
    tests, names = _two_part_tests([term(1, "x", "$U2")], [term(1, "y", "$D2")], I, O)
    consts = srs_consts(srs, names)
    consts["$U2"] = static_get(static, "U2")
    consts["$D2"] = static_get(static, "D2")
    return build_testset(tests, consts)


register(KindSpec(BlockKind.CQLin, _slots, lambda s: (), lambda s: (), _tests))


def prove_cqlin(srs: Srs, x: Row, y: Row, W: FixedMatrix, alpha: int) -> BlockProof:
    pre = get_preprocessed_matrix(srs, W)
    if x.n != pre.I or y.n != pre.O:
        raise ShapeError(f"CQLin: expected rows of length {pre.I} -> {pre.O}, got {x.n} -> {y.n}")
    if checks_enabled():
        want = W.apply(x.values[:W.in_dim])
        if list(y.values[:W.out_dim]) != want:
            raise WitnessInvalidError("CQLin: y != W x")
    a = powers(alpha, W.out_dim)
    u = [sum(a[o] * W.rows[o][i] for o in range(W.out_dim)) % P for i in range(W.in_dim)] + [0] * (pre.I - W.in_dim)
    d = a + [0] * (pre.O - W.out_dim)
    left = sumcheck_part(srs, x.poly, interpolate(u, domain_new(pre.I)), pre.I)
    right = sumcheck_part(srs, y.poly, _weight_poly(tuple(d)), pre.O)
    static = cqlin_static(srs, W, alpha)
    g1 = (x.com, y.com) + sumcheck_values(left) + sumcheck_values(right, False)
    return BlockProof(BlockKind.CQLin, static, (), g1, (), tuple(derive_challenges(BlockKind.CQLin, static, (), {})))
