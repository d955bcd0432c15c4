"""Add, Sub, Eq and Concat: relations checked by group arithmetic alone."""

from __future__ import annotations

from typing import Sequence

from ..errors import ArgumentError, ShapeError
from ..pcs.kzg import Srs
from .base import BlockKind, BlockProof, KindSpec, derive_challenges, make_static, register, static_get
from .common import Row, srs_consts
from .relaxed import build_testset, term

_LINEAR_SIGNS = {
    BlockKind.Add: (1, 1, -1),   # f + g - h
    BlockKind.Sub: (1, -1, -1),  # f - g - h
}


def _linear_tests(kind: BlockKind):
    def tests(static, srs):
        if kind is BlockKind.Eq:
            ts = [term(1, "f", "$g2"), term(-1, "g", "$g2")]
        else:
            a, b, c = _LINEAR_SIGNS[kind]
            ts = [term(a, "f", "$g2"), term(b, "g", "$g2"), term(c, "h", "$g2")]
        return build_testset([(kind.value, ts)], srs_consts(srs, ["$g2"]))

    return tests


for _k, _slots in ((BlockKind.Add, ("f", "g", "h")), (BlockKind.Sub, ("f", "g", "h")), (BlockKind.Eq, ("f", "g"))):
    register(KindSpec(_k, (lambda s, _sl=_slots: _sl), lambda s: (), lambda s: (), _linear_tests(_k)))


def _concat_slots(static):
    k = static_get(static, "k")
    return tuple(f"g{i}" for i in range(k)) + tuple(f"h{i}" for i in range(k))


def _concat_tests(static, srs):
    k = static_get(static, "k")
    tests = [(f"row{i}", [term(1, f"h{i}", "$g2"), term(-1, f"g{i}", "$g2")]) for i in range(k)]
    return build_testset(tests, srs_consts(srs, ["$g2"]))


register(KindSpec(BlockKind.Concat, _concat_slots, lambda s: (), lambda s: (), _concat_tests))


def prove_linear(kind: BlockKind, inputs: Sequence[Row], srs: Srs | None = None,
                 row_counts: Sequence[int] = ()) -> BlockProof:
    """Add/Sub take (f, g, h); Eq takes (f, g); Concat takes the input rows then the output rows."""
    kind = BlockKind(kind)
    coms = [r.com if isinstance(r, Row) else r for r in inputs]
    if kind in _LINEAR_SIGNS:
        if len(coms) != 3:
            raise ArgumentError(f"{kind.value} expects (f, g, h)")
        static = make_static()
    elif kind is BlockKind.Eq:
        if len(coms) != 2:
            raise ArgumentError("Eq expects (f, g)")
        static = make_static()
    elif kind is BlockKind.Concat:
        if len(coms) % 2:
            raise ShapeError("Concat needs as many output rows as input rows")
        # the part count is static so that every member of a fold group has the same pi length
        static = make_static(k=len(coms) // 2, parts=len(row_counts))
    else:
        raise ArgumentError(f"{kind.value} is not a linear block")
    pi = tuple(row_counts)
    ch = derive_challenges(kind, static, pi, {})
    return BlockProof(kind, static, pi, tuple(coms), (), tuple(ch))


def prove_add(f: Row, g: Row, h: Row) -> BlockProof:
    return prove_linear(BlockKind.Add, [f, g, h])


def prove_sub(f: Row, g: Row, h: Row) -> BlockProof:
    return prove_linear(BlockKind.Sub, [f, g, h])


def prove_eq(f: Row, g: Row) -> BlockProof:
    return prove_linear(BlockKind.Eq, [f, g])


def prove_concat(inputs: Sequence[Row], outputs: Sequence[Row], row_counts: Sequence[int] = ()) -> BlockProof:
    if len(inputs) != len(outputs):
        raise ShapeError("Concat: output row count must equal total input rows")
    return prove_linear(BlockKind.Concat, list(inputs) + list(outputs), row_counts=row_counts or (len(inputs),))
