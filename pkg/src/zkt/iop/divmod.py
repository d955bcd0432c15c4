"""Batched Div/Mod: a = q*b + r with 0 <= r < b, checked over a whole row at once.

The composite is not foldable, but every component is an ordinary block
proof: Eq (public divisor) or Mul + Add (committed divisor), and two range
lookups for r >= 0 and b - 1 - r >= 0.
"""

from __future__ import annotations

from typing import Union

from ..algebra.curve import G1
from ..algebra.field import MODULUS as P
from ..algebra.field import decode_signed, encode_signed
from ..algebra.poly import Polynomial
from ..blocks.base import BlockKind, BlockProof, checks_enabled, make_static, static_get, verify_block
from ..blocks.common import Row, commit_values
from ..blocks.linear import prove_add, prove_eq
from ..blocks.lookup import LookupTable, preprocess_table, prove_cq, public_cq_static
from ..blocks.mul import prove_mul
from ..errors import ArgumentError, FormatError, ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from .protocols import Verdict


def remainder_table(bits: int) -> LookupTable:
    return LookupTable.range(0, 2 ** bits)


def divide_values(a, b):
    """Floor division on signed decoded values; returns (q, r) as field elements."""
    qs, rs = [], []
    bs = b if isinstance(b, (list, tuple)) else [b] * len(a)
    for x, y in zip(a, bs):
        x, y = decode_signed(x), decode_signed(y)
        if y <= 0:
            raise ArgumentError("divisor must be positive")
        q, r = divmod(x, y)
        qs.append(encode_signed(q))
        rs.append(r)
    return qs, rs


def _slack_row(srs: Srs, b: Union[int, Row], r: Row) -> Row:
    if isinstance(b, Row):
        vals = [(x - 1 - y) % P for x, y in zip(b.values, r.values)]
        return Row(tuple(vals), b.poly - Polynomial.constant(1) - r.poly, b.com - srs.g1 - r.com)
    vals = [(b - 1 - y) % P for y in r.values]
    return Row(tuple(vals), Polynomial.constant(b - 1) - r.poly, srs.g1 * (b - 1) - r.com)


def div_mod_prove(srs: Srs, a: Row, b: Union[int, Row], q: Row, r: Row, bits: int = 8,
                  mode: str = "Div") -> BlockProof:
    kind = BlockKind(mode)
    if kind not in (BlockKind.Div, BlockKind.Mod):
        raise ArgumentError("mode must be Div or Mod")
    n = a.n
    if q.n != n or r.n != n or (isinstance(b, Row) and b.n != n):
        raise ShapeError("Div/Mod: rows must share a domain")
    table = remainder_table(bits)
    preprocess_table(srs, table)
    if checks_enabled():
        bv = list(b.values) if isinstance(b, Row) else [b] * n
        for j in range(n):
            if (q.values[j] * bv[j] + r.values[j] - a.values[j]) % P or not 0 <= r.values[j] < bv[j] % P:
                raise WitnessInvalidError(f"Div/Mod: relation fails at position {j}")
    parts: dict = {}
    g1 = [a.com, q.com, r.com]
    if isinstance(b, Row):
        qb = commit_values(srs, [x * y % P for x, y in zip(q.values, b.values)])
        parts["mul"] = prove_mul(srs, q, b, qb)
        parts["add"] = prove_add(qb, r, a)
        g1 += [b.com, qb.com]
        divisor = 0
    else:
        if b <= 0:
            raise ArgumentError("public divisor must be positive")
        parts["eq"] = prove_eq(a, q.com * b + r.com)
        divisor = b
    parts["r_range"] = prove_cq(srs, r, table)
    parts["slack_range"] = prove_cq(srs, _slack_row(srs, b, r), table)
    static = make_static(n=n, bits=bits, divisor=divisor)
    return BlockProof(kind, static, (), tuple(g1), (), (), parts)


def verify_div_mod(p: BlockProof, srs: Srs) -> Verdict:
    n, bits, divisor = (static_get(p.static, k) for k in ("n", "bits", "divisor"))
    if not isinstance(p.payload, dict):
        raise FormatError("Div/Mod proof has no components")
    want = 3 if divisor else 5
    if len(p.g1) != want or not all(isinstance(c, G1) for c in p.g1):
        raise FormatError("Div/Mod proof has the wrong commitment count")
    a, q, r = p.g1[:3]
    cqs = public_cq_static(srs, remainder_table(bits), n, False)

    def part(name: str, kind: BlockKind) -> BlockProof:
        c = p.payload.get(name)
        if not isinstance(c, BlockProof) or c.kind is not kind:
            raise FormatError(f"Div/Mod component {name} missing or of the wrong kind")
        return c

    if divisor:
        eq = part("eq", BlockKind.Eq)
        if eq.g1 != (a, q * divisor + r) or not verify_block(eq, srs):
            return Verdict(False, "eq")
        slack = srs.g1 * (divisor - 1) - r
    else:
        b, qb = p.g1[3:]
        mul, add = part("mul", BlockKind.Mul), part("add", BlockKind.Add)
        if mul.slot("f") != q or mul.slot("h") != b or mul.slot("g") != qb or not verify_block(mul, srs):
            return Verdict(False, "mul")
        if add.g1 != (qb, r, a) or not verify_block(add, srs):
            return Verdict(False, "add")
        slack = b - srs.g1 - r
    for name, com in (("r_range", r), ("slack_range", slack)):
        c = part(name, BlockKind.CQ)
        if c.static != cqs or c.slot("f") != com or not verify_block(c, srs):
            return Verdict(False, name)
    return Verdict(True)
