"""MulConst, MulScalar and Mul (pointwise products over H)."""

from __future__ import annotations

from ..algebra.curve import G2
from ..algebra.field import MODULUS as P
from ..algebra.poly import domain_new, quotient_by_vanishing
from ..errors import ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from .base import BlockKind, BlockProof, KindSpec, checks_enabled, derive_challenges, make_static, register, static_get
from .common import Row, srs_consts
from .relaxed import build_testset, term


def _mulconst_tests(static, srs):
    c = static_get(static, "c")
    return build_testset([("MulConst", [term(c, "f", "$g2"), term(-1, "g", "$g2")])], srs_consts(srs, ["$g2"]))


register(KindSpec(BlockKind.MulConst, lambda s: ("f", "g"), lambda s: (), lambda s: (), _mulconst_tests))


def _mulscalar_tests(static, srs):
    return build_testset([
        ("product", [term(1, "f", "s2"), term(-1, "g", "$g2")]),
        ("dual", [term(1, "$g1", "s2"), term(-1, "s", "$g2")]),
    ], srs_consts(srs, ["$g1", "$g2"]))


register(KindSpec(BlockKind.MulScalar, lambda s: ("f", "g", "s"), lambda s: ("s2",), lambda s: (), _mulscalar_tests))


def _mul_tests(static, srs):
    n = static_get(static, "n")
    zh = f"$zh:{n}"
    return build_testset([
        ("product", [term(1, "f", "h2"), term(-1, "g", "$g2"), term(-1, "t", zh)]),
        ("dual", [term(1, "$g1", "h2"), term(-1, "h", "$g2")]),
    ], srs_consts(srs, ["$g1", "$g2", zh]))


register(KindSpec(BlockKind.Mul, lambda s: ("f", "h", "g", "t"), lambda s: ("h2",), lambda s: (), _mul_tests))


def _finish(kind, static, g1, g2) -> BlockProof:
    ch = derive_challenges(kind, static, (), {})
    return BlockProof(kind, static, (), tuple(g1), tuple(g2), tuple(ch))


def prove_mulconst(f: Row, g: Row, c: int) -> BlockProof:
    if checks_enabled() and any((c * a - b) % P for a, b in zip(f.values, g.values)):
        raise WitnessInvalidError("MulConst: g != c*f on H")
    return _finish(BlockKind.MulConst, make_static(c=c % P), (f.com, g.com), ())


def scalar_commitments(srs: Srs, s: int):
    """Commitments of the constant polynomial S in both groups."""
    return srs.g1 * s, srs.g2 * s


def prove_mulscalar(srs: Srs, f: Row, g: Row, s: int, s_com=None) -> BlockProof:
    if checks_enabled() and any((s * a - b) % P for a, b in zip(f.values, g.values)):
        raise WitnessInvalidError("MulScalar: g != S*f on H")
    s1 = s_com if s_com is not None else srs.g1 * s
    return _finish(BlockKind.MulScalar, make_static(), (f.com, g.com, s1), (srs.g2 * s,))


def prove_mul(srs: Srs, f: Row, h: Row, g: Row) -> BlockProof:
    n = f.n
    if h.n != n or g.n != n:
        raise ShapeError("Mul: operands must share a domain")
    num = f.poly * h.poly - g.poly
    if checks_enabled():
        t = quotient_by_vanishing(num, domain_new(n))
    else:
        t, _ = num.divmod_vanishing(n)
    h2: G2 = srs.commit_coeffs_g2(h.poly.coeffs)
    return _finish(BlockKind.Mul, make_static(n=n), (f.com, h.com, g.com, srs.commit_coeffs(t.coeffs)), (h2,))
