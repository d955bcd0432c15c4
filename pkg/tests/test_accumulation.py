import dataclasses
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import FOLDABLE, Gen, bump, refold
from zkt.accumulation import (SCHEDULES, Accumulator, cross_identity_holds, decide, expected_depth, fold,
                              fold_tree, fold_verify, relax_proof)
from zkt.algebra import GT, MODULUS as P
from zkt.blocks import BlockKind
from zkt.errors import ArgumentError, FoldError


def leaves(gen, kind, count, n=8):
    return [getattr(gen, kind.value)(n) for _ in range(count)]


def test_fold_two_adds_decides(srs, gen):
    a, b = (relax_proof(p, srs)[1] for p in leaves(gen, BlockKind.Add, 2))
    acc, pf = fold(a, b, srs)
    assert pf == []  # degree-1 tests have no cross terms
    assert decide(acc, srs)
    assert fold_verify(a.x, b.x, pf, acc.x, srs)


def test_tampered_error_rejected_by_decide(srs, gen):
    a, b = (relax_proof(p, srs)[1] for p in leaves(gen, BlockKind.Mul, 2))
    acc, _ = fold(a, b, srs)
    k = bump(random.Random(1))
    E = (k(acc.x.E[0]),) + acc.x.E[1:]
    assert not decide(Accumulator.from_instance(dataclasses.replace(acc.x, E=E)), srs)


def test_fold_verify_rejects_forged_pf_and_mu(srs, gen):
    a, b = (relax_proof(p, srs)[1] for p in leaves(gen, BlockKind.Mul, 2))
    acc, pf = fold(a, b, srs)
    assert fold_verify(a.x, b.x, pf, acc.x, srs)
    forged = [list(v) for v in pf]
    forged[0][0] = bump(random.Random(2))(forged[0][0])
    assert not fold_verify(a.x, b.x, forged, acc.x, srs)
    assert not fold_verify(a.x, b.x, pf, dataclasses.replace(acc.x, mu=(acc.x.mu + 1) % P), srs)
    assert not fold_verify(a.x, b.x, pf, dataclasses.replace(acc.x, b=1), srs)
    # a verifier-consistent result for the forged pf still fails the decider
    bad = refold(a.x, b.x, forged, 2)
    assert fold_verify(a.x, b.x, forged, bad, srs)
    assert not decide(Accumulator.from_instance(bad), srs)


def test_fold_verify_needs_degree(srs, gen):
    a, b = (relax_proof(p, srs)[1] for p in leaves(gen, BlockKind.Add, 2))
    acc, pf = fold(a, b, srs)
    with pytest.raises(FoldError):
        fold_verify(a.x, b.x, pf, acc.x)
    assert fold_verify(a.x, b.x, pf, acc.x, degree=1)


def test_sequential_folds(srs, gen):
    base = leaves(gen, BlockKind.Mul, 5)
    acc = relax_proof(base[0], srs)[1]
    for p in base[1:]:
        acc, _ = fold(acc, relax_proof(p, srs)[1], srs)
        assert decide(acc, srs)
    zeroed = dataclasses.replace(acc.x, E=(GT.zero(),) * len(acc.x.E))
    assert not decide(Accumulator.from_instance(zeroed), srs)


def test_tree_depth_cq2(srs, gen):
    root, tree = fold_tree(leaves(gen, BlockKind.CQ2, 4), srs)
    assert tree.depth == 2 == expected_depth(4)
    assert decide(root, srs)
    assert all(tree.replay(srs))


@pytest.mark.parametrize("schedule", ["tree", "left"])
def test_sixteen_leaves_each_schedule(srs, gen, schedule):
    proofs = leaves(gen, BlockKind.Sub, 16)
    root, tree = fold_tree(proofs, srs, schedule=schedule)
    assert decide(root, srs)
    assert all(tree.replay(srs))
    assert tree.depth == (4 if schedule == "tree" else 15)
    assert root.b == 0 and all(t[3].b == 0 for t in tree.triples())


def test_schedules_listed():
    assert "tree" in SCHEDULES


def test_tree_replay_detects_reused_leaf(srs, gen):
    _, tree = fold_tree(leaves(gen, BlockKind.Add, 4), srs)
    node = tree.nodes[1]
    tree.nodes[1] = dataclasses.replace(node, left=tree.nodes[0].left, right=tree.nodes[0].right)
    assert not all(tree.replay(srs))


def test_cross_identity_points(srs, gen):
    for kind in (BlockKind.Mul, BlockKind.MulScalar, BlockKind.Sum):
        p1, p2 = leaves(gen, kind, 2)
        ts, a = relax_proof(p1, srs)
        _, b = relax_proof(p2, srs)
        a, b = _fresh(a, b)
        _, pf = fold(a, b, srs)
        assert cross_identity_holds(ts, a, b, pf, [2, 3, 5])


def _fresh(a, b):
    from zkt.accumulation.accumulator import _fresh_challenges

    return (Accumulator(_fresh_challenges(a.x), a.w), Accumulator(_fresh_challenges(b.x), b.w))


def test_cross_identity_self_fold(srs, gen):
    # v = v2: T((X+1) v) = (X+1)^d T(v), so e_j must be binomial multiples of T(v)
    p = gen.Mul(8)
    ts, a = relax_proof(p, srs)
    a, _ = _fresh(a, a)
    _, pf = fold(a, a, srs)
    assert cross_identity_holds(ts, a, a, pf, [2, 3, 5])
    assert all(e.is_zero() for row in pf for e in row)


def test_fold_with_zero_accumulator(srs, gen):
    p = gen.Mul(8)
    _, a = relax_proof(p, srs)
    z = Accumulator.zero(p.kind, p.static, srs, n_pi=len(p.pi))
    assert decide(z, srs)
    acc, _ = fold(z, a, srs)
    assert decide(acc, srs) and acc.mu == 1


def test_fold_tree_errors(srs, gen):
    with pytest.raises(ArgumentError):
        fold_tree([], srs)
    with pytest.raises(FoldError):
        fold_tree([gen.Add(8), gen.Sub(8)], srs)
    with pytest.raises(ArgumentError):
        fold_tree([gen.Add(8)], srs, schedule="zigzag")


def test_single_leaf_tree(srs, gen):
    p = gen.Add(8)
    root, tree = fold_tree([p], srs)
    assert tree.depth == 0 and root.b == 1
    assert decide(root, srs)


@settings(max_examples=12)
@given(st.sampled_from(FOLDABLE), st.integers(2, 5), st.integers(0, 2 ** 32))
def test_fold_completeness_property(srs, kind, count, seed):
    g = Gen(srs, seed=seed)
    g.shared_alpha = 12345
    n = 8
    proofs = [g.make(kind) if kind is BlockKind.Concat else getattr(g, kind.value)(n) for _ in range(count)]
    # group members must share static parameters
    proofs = [p for p in proofs if p.static == proofs[0].static and len(p.g1) == len(proofs[0].g1)]
    root, tree = fold_tree(proofs, srs)
    assert decide(root, srs)
    assert all(tree.replay(srs))
    assert tree.depth == expected_depth(len(proofs))
