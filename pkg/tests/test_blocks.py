import dataclasses
import random

import pytest

from support import DOMAINS, FOLDABLE, Gen, accepts, decide_relaxed, mutate
from zkt.algebra import G1, G2, MODULUS as P, encode_signed
from zkt.blocks import (BlockKind, FixedMatrix, LookupTable, SharedRandomness, commit_values, make_static,
                        preprocess_matrix, preprocess_table, prove_add, prove_concat, prove_cq, prove_cq2, prove_cqlin,
                        prove_eq, prove_matmul, prove_mul, prove_mulconst, prove_mulscalar, prove_permute, prove_sub,
                        prove_sum, relax, spec_for, verify_block)
from zkt.blocks import testset_for as relaxed_tests
from zkt.blocks.base import allow_invalid_witness
from zkt.errors import ConfigurationError, FormatError, UnsupportedFoldError, WitnessInvalidError
from zkt.iop import copy_constraint, PermutationMap


def row(srs, vals):
    return commit_values(srs, [v % P for v in vals])


def rand(rng):
    return SharedRandomness(rng.randrange(P), rng.randrange(P))


def test_foldable_flags_match_block_list():
    foldable = {k for k in BlockKind if k.foldable}
    assert foldable == set(FOLDABLE)
    assert len(foldable) == 13
    for k in ("Div", "Mod", "BooleanCheck", "MaxProof", "CopyConstraint", "OneToOne", "Ordered"):
        assert not BlockKind(k).foldable


# linear ---------------------------------------------------------------------------

def test_add_examples(srs):
    f = row(srs, [5, 6, 7, 8])
    assert verify_block(prove_add(f, row(srs, [0] * 4), f), srs)
    a, b = row(srs, [1, 2]), row(srs, [3, 4])
    assert verify_block(prove_add(a, b, row(srs, [4, 6])), srs)


def test_add_perturbed_output_rejects(srs):
    a, b, h = row(srs, [1, 2]), row(srs, [3, 4]), row(srs, [4, 6])
    pf = prove_add(a, b, h)
    bad = dataclasses.replace(pf, g1=pf.g1[:2] + (pf.g1[2] + G1.generator(),))
    assert not verify_block(bad, srs)


def test_sub_eq_concat(srs):
    f, g = row(srs, [9, 7, 5, 3]), row(srs, [1, 2, 3, 4])
    assert verify_block(prove_sub(f, g, row(srs, [8, 5, 2, -1])), srs)
    assert not verify_block(prove_sub(f, g, row(srs, [8, 5, 2, 1])), srs)
    assert verify_block(prove_eq(f, row(srs, [9, 7, 5, 3])), srs)
    assert not verify_block(prove_eq(f, g), srs)
    ins = [f, g, row(srs, [0, 0, 1, 1])]
    outs = [row(srs, list(r.values)) for r in ins]
    pf = prove_concat(ins, outs, [2, 1])
    assert pf.pi == (2, 1) and verify_block(pf, srs)
    assert not verify_block(prove_concat(ins, outs[::-1], [2, 1]), srs)


# multiplicative ------------------------------------------------------------------------

def test_mulconst_examples(srs):
    rng = random.Random(1)
    f = [rng.randrange(100) for _ in range(8)]
    fr = row(srs, f)
    assert verify_block(prove_mulconst(fr, fr, 1), srs)
    assert verify_block(prove_mulconst(fr, row(srs, [0] * 8), 0), srs)
    assert verify_block(prove_mulconst(fr, row(srs, [3 * v for v in f]), 3), srs)
    with pytest.raises(WitnessInvalidError):
        prove_mulconst(fr, row(srs, [3 * v + 1 for v in f]), 3)
    with allow_invalid_witness():
        assert not verify_block(prove_mulconst(fr, row(srs, [3 * v + 1 for v in f]), 3), srs)


def test_mulscalar_examples(srs):
    rng = random.Random(2)
    f = [rng.randrange(100) for _ in range(8)]
    fr = row(srs, f)
    assert verify_block(prove_mulscalar(srs, fr, fr, 1), srs)
    assert verify_block(prove_mulscalar(srs, fr, row(srs, [0] * 8), 0), srs)
    s = rng.randrange(P)
    pf = prove_mulscalar(srs, fr, row(srs, [s * v for v in f]), s)
    assert verify_block(pf, srs)
    # replace s' (the G2 copy of S) with a commitment to S+1
    bad = dataclasses.replace(pf, g2=tuple(x + G2.generator() for x in pf.g2[:1]) + pf.g2[1:])
    assert not verify_block(bad, srs)


def test_mul_examples(srs):
    rng = random.Random(3)
    f = [rng.randrange(100) for _ in range(8)]
    fr = row(srs, f)
    assert verify_block(prove_mul(srs, fr, row(srs, [1] * 8), fr), srs)
    z = row(srs, [0] * 8)
    assert verify_block(prove_mul(srs, z, z, z), srs)
    h = [rng.randrange(100) for _ in range(8)]
    g = [a * b for a, b in zip(f, h)]
    assert verify_block(prove_mul(srs, fr, row(srs, h), row(srs, g)), srs)
    g[3] += 1
    with pytest.raises(WitnessInvalidError):
        prove_mul(srs, fr, row(srs, h), row(srs, g))


def test_sum_examples(srs):
    assert verify_block(prove_sum(srs, row(srs, [0] * 4), row(srs, [0])), srs)
    assert verify_block(prove_sum(srs, row(srs, [7] * 8), row(srs, [56])), srs)
    f = row(srs, [1, 2, 3, 4])
    assert verify_block(prove_sum(srs, f, row(srs, [10])), srs)
    with allow_invalid_witness():
        assert not verify_block(prove_sum(srs, f, row(srs, [11])), srs)


# MatMul / Permute --------------------------------------------------------------------

def test_matmul_identity_and_zero(srs):
    rng = random.Random(4)
    I = [row(srs, [1, 0]), row(srs, [0, 1])]
    B = [[rng.randrange(50) for _ in range(2)] for _ in range(2)]
    C = [[sum(a * b for a, b in zip(ai, bj)) for bj in B] for ai in ([1, 0], [0, 1])]
    assert verify_block(prove_matmul(srs, I, [row(srs, b) for b in B], [row(srs, c) for c in C], rand(rng)), srs)
    Z = [row(srs, [0, 0])] * 2
    assert verify_block(prove_matmul(srs, Z, [row(srs, b) for b in B], [row(srs, [0, 0])] * 2, rand(rng)), srs)


def test_matmul_naive_oracle_and_perturbation(srs):
    rng = random.Random(5)
    A = [[rng.randrange(10) for _ in range(2)] for _ in range(3)]
    B = [[rng.randrange(10) for _ in range(2)] for _ in range(3)]    # C = A . B^T, 3x3 padded to 4 columns
    C = [[sum(A[i][k] * B[j][k] for k in range(2)) for j in range(3)] + [0] for i in range(3)]
    Ar, Br = [row(srs, a) for a in A], [row(srs, b) for b in B]
    assert verify_block(prove_matmul(srs, Ar, Br, [row(srs, c) for c in C], rand(rng)), srs)
    bad = [list(c) for c in C]
    bad[1][2] += 1
    for _ in range(20):
        with allow_invalid_witness():
            try:
                pf = prove_matmul(srs, Ar, Br, [row(srs, c) for c in bad], rand(rng))
            except WitnessInvalidError:
                continue
        assert not verify_block(pf, srs)


def test_permute_identity_transpose_and_swap(srs):
    rng = random.Random(6)
    A = [[rng.randrange(100) for _ in range(2)] for _ in range(2)]
    Ar = [row(srs, a) for a in A]
    assert verify_block(prove_permute(srs, Ar, [row(srs, a) for a in A], [0, 2], [0, 1], rand(rng)), srs)
    T = [[A[j][i] for j in range(2)] for i in range(2)]
    # B[i2][j2] = A_flat[p0[i2] + p1[j2]]; transpose: p0 = [0, 1], p1 = [0, 2]
    pf = prove_permute(srs, Ar, [row(srs, t) for t in T], [0, 1], [0, 2], rand(rng))
    assert verify_block(pf, srs)
    S = [list(t) for t in T]
    if S[0][1] == S[1][0]:
        S[1][0] += 1
    S[0][1], S[1][0] = S[1][0], S[0][1]
    for _ in range(20):
        with allow_invalid_witness():
            try:
                pf = prove_permute(srs, Ar, [row(srs, s) for s in S], [0, 1], [0, 2], rand(rng))
            except WitnessInvalidError:
                continue
        assert not verify_block(pf, srs)


# lookups ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tables(srs):
    rng8 = LookupTable.range(0, 8, "r8")
    relu = LookupTable.function(lambda x: max(x, 0), -8, 8, "relu8")
    preprocess_table(srs, rng8)
    preprocess_table(srs, relu)
    return rng8, relu


def test_cq_examples(srs, tables):
    rng8, _ = tables
    assert verify_block(prove_cq(srs, row(srs, [1, 3, 5, 5]), rng8), srs)
    with allow_invalid_witness():
        assert not verify_block(prove_cq(srs, row(srs, [1, 3, 9, 5]), rng8), srs)


def test_cq2_relu_examples(srs, tables):
    _, relu = tables
    fi = row(srs, [-2, 0, 3, 0])
    assert verify_block(prove_cq2(srs, fi, row(srs, [0, 0, 3, 0]), relu), srs)
    with allow_invalid_witness():
        assert not verify_block(prove_cq2(srs, fi, row(srs, [0, 0, 2, 0]), relu), srs)


def test_cq_soundness_fuzz_200(srs, tables):
    rng8, _ = tables
    rng = random.Random(7)
    accepted = 0
    for _ in range(200):
        n = rng.choice([4, 8, 16])
        v = [rng.randrange(8) for _ in range(n)]
        v[rng.randrange(n)] = rng.choice([rng.randrange(8, 1000), -rng.randrange(1, 1000)])
        with allow_invalid_witness():
            accepted += verify_block(prove_cq(srs, row(srs, v), rng8), srs)
    assert accepted == 0


def test_cq_unpreprocessed_table(srs):
    t = LookupTable.range(0, 4, "never-preprocessed")
    with pytest.raises(ConfigurationError):
        prove_cq(srs, row(srs, [0, 1, 2, 3]), t)


def test_cqlin(srs):
    rng = random.Random(8)
    W = FixedMatrix.from_ints([[rng.randrange(-5, 6) for _ in range(8)] for _ in range(4)], "w4x8")
    preprocess_matrix(srs, W)
    x = [rng.randrange(-20, 20) for _ in range(8)]
    xr = row(srs, x)
    y = W.apply([v % P for v in x])
    a = rng.randrange(P)
    assert verify_block(prove_cqlin(srs, xr, commit_values(srs, y), W, a), srs)
    y[1] = (y[1] + 1) % P
    with allow_invalid_witness():
        assert not verify_block(prove_cqlin(srs, xr, commit_values(srs, y), W, a), srs)


# verify_block / relax --------------------------------------------------------------

def test_wrong_kind_tag_is_format_error(srs):
    pf = prove_add(row(srs, [1]), row(srs, [2]), row(srs, [3]))
    with pytest.raises(FormatError):
        verify_block(dataclasses.replace(pf, kind=BlockKind.Mul), srs)
    with pytest.raises(FormatError):
        verify_block(dataclasses.replace(pf, g1=pf.g1[:2]), srs)


def test_relax_instance_shape(srs):
    pf = prove_add(row(srs, [1, 2]), row(srs, [3, 4]), row(srs, [4, 6]))
    ts, acc = relax(pf, srs)
    inst = acc.x
    assert inst.b == 1 and inst.mu == 1 and all(e.is_zero() for e in inst.E)
    assert len(inst.E) == len(ts)


def test_relax_non_foldable(srs):
    inp = row(srs, [1, 2, 3, 4])
    pf = copy_constraint(srs, [inp], [row(srs, [2, 3])], PermutationMap.build(1, 4, 1, 2, [1, 2]))
    with pytest.raises(UnsupportedFoldError):
        relax(pf, srs)


def test_relaxed_degrees(srs, gen):
    want = {"Add": 1, "Sub": 1, "Eq": 1, "Concat": 1, "MulConst": 1, "Mul": 2, "MulScalar": 2, "MatMul": 2,
            "Permute": 2}
    for k, d in want.items():
        pf = gen.make(k)
        assert relaxed_tests(pf.kind, pf.static, srs).degree == d, k


def test_relaxed_form_reduces_to_original(srs, gen):
    """decide(relax(pi)) agrees with verify_block on honest and mutated proofs."""
    rng = random.Random(9)
    for kind in FOLDABLE:
        for _ in range(4):
            pf = gen.make(kind)
            assert verify_block(pf, srs) and decide_relaxed(pf, srs)
            m, _, _ = mutate(pf, rng)
            assert accepts(m, srs) == decide_relaxed(m, srs) == False  # noqa: E712


def test_slot_layout_consistent(gen):
    for kind in FOLDABLE:
        pf = gen.make(kind)
        sp = spec_for(pf.kind)
        assert len(sp.g1_slots(pf.static)) == len(pf.g1)
        assert len(sp.g2_slots(pf.static)) == len(pf.g2)


@pytest.mark.parametrize("n", DOMAINS)
def test_every_kind_every_domain(srs, n):
    g = Gen(srs, seed=n)
    for kind in [k.value for k in FOLDABLE] + ["BooleanCheck", "Ordered", "MaxProof", "CopyConstraint", "DivMod"]:
        pf = getattr(g, kind)(n)
        assert accepts(pf, srs), (kind, n)


def test_make_static_sorted():
    assert make_static(b=1, a=2) == (("a", 2), ("b", 1))
