import random

import pytest

from support import Gen, signed
from zkt.algebra import MODULUS as P
from zkt.blocks import commit_values
from zkt.blocks.base import allow_invalid_witness
from zkt.errors import FormatError, WitnessInvalidError
from zkt.iop import (Constraint, IopCircuit, PermutationMap, Witness, boolean_check, copy_constraint, div_mod_prove,
                     divide_values, iop_prove, iop_verify, max_proof, one_to_one, ordered_check, verify_standalone,
                     verify_standalone_report)


def row(srs, vals):
    return commit_values(srs, [v % P for v in vals])


# raw IOP ---------------------------------------------------------------------------

def mul_circuit(n):
    k = Constraint("mul", lambda e: e.w("a") * e.w("b") - e.w("c"), 2)
    return IopCircuit("TestMul", n, (Witness("a"), Witness("b"), Witness("c")), (k,))


def shift_circuit(n):
    # c[j+1] = c[j] + a[j] except at the wrap-around row
    last = tuple(1 if j == n - 1 else 0 for j in range(n))
    k = Constraint("acc", lambda e: (1 - e.p("last")) * (e.s("c") - e.w("c") - e.w("a")), 2)
    return IopCircuit("TestShift", n, (Witness("a"), Witness("c")), (k,), {"last": last})


def mul_values(rng, n):
    a = [rng.randrange(P) for _ in range(n)]
    b = [rng.randrange(P) for _ in range(n)]
    return {"a": a, "b": b, "c": [x * y % P for x, y in zip(a, b)]}


def shift_values(rng, n):
    a = [rng.randrange(1000) for _ in range(n)]
    c = [0]
    for v in a[:-1]:
        c.append(c[-1] + v)
    return {"a": a, "c": c}


def test_random_satisfied_circuits_accept(srs):
    rng = random.Random(11)
    for k in range(100):
        n = rng.choice([4, 8, 16])
        if k % 2:
            c, vals = mul_circuit(n), mul_values(rng, n)
        else:
            c, vals = shift_circuit(n), shift_values(rng, n)
        pf = iop_prove(c, srs, vals, seed=rng.randbytes(8))
        assert iop_verify(c, srs, {}, pf).ok


def test_unsatisfied_circuit_refused_by_prover(srs):
    vals = mul_values(random.Random(1), 8)
    vals["c"][3] = (vals["c"][3] + 1) % P
    with pytest.raises(WitnessInvalidError):
        iop_prove(mul_circuit(8), srs, vals)


def test_unsatisfied_circuit_rejected(srs):
    vals = mul_values(random.Random(2), 8)
    vals["c"][3] = (vals["c"][3] + 1) % P
    pf = iop_prove(mul_circuit(8), srs, vals, check=False)
    assert not iop_verify(mul_circuit(8), srs, {}, pf).ok


def test_perturbed_quotient_eval_rejected_at_step4(srs):
    c = mul_circuit(8)
    pf = iop_prove(c, srs, mul_values(random.Random(3), 8), seed=b"s")
    bad = pf.replace(q_at_zeta=((pf.q_at_zeta[0] + 1) % P,))
    assert iop_verify(c, srs, {}, bad).stage == "step4"


def test_replaced_opening_rejected(srs):
    c = mul_circuit(8)
    pf = iop_prove(c, srs, mul_values(random.Random(4), 8), seed=b"s")
    assert iop_verify(c, srs, {}, pf.replace(h1=pf.h1 + srs.g1)).stage == "open-zeta"
    assert iop_verify(c, srs, {}, pf.replace(h2=pf.h2 + srs.g1)).stage == "open-omega-zeta"


def test_wrong_shape_is_format_error(srs):
    c = mul_circuit(8)
    pf = iop_prove(c, srs, mul_values(random.Random(5), 8))
    with pytest.raises(FormatError):
        iop_verify(c, srs, {}, pf.replace(F=pf.F[:2]))
    with pytest.raises(FormatError):
        iop_verify(c, srs, {}, pf.replace(at_zeta=(P,) + pf.at_zeta[1:]))


def test_blinding_gives_distinct_commitments(srs):
    c = mul_circuit(8)
    vals = mul_values(random.Random(6), 8)
    a = iop_prove(c, srs, vals, seed=b"one")
    b = iop_prove(c, srs, vals, seed=b"two")
    assert set(a.F).isdisjoint(b.F)
    assert a.at_zeta != b.at_zeta


# standalone protocols --------------------------------------------------------------

def test_boolean_check(srs):
    for vals in ([0, 1, 1, 0], [0] * 8, [1] * 8):
        assert verify_standalone(boolean_check(srs, row(srs, vals), seed=b"b"), srs)
    with pytest.raises(WitnessInvalidError):
        boolean_check(srs, row(srs, [0, 2, 1, 0]))
    with allow_invalid_witness():
        pf = boolean_check(srs, row(srs, [0, 2, 1, 0]))
    assert not verify_standalone(pf, srs)


def test_boolean_check_active_prefix(srs):
    # padding slots past n_log are not constrained
    assert verify_standalone(boolean_check(srs, row(srs, [1, 0, 1, 7]), n_log=3), srs)


def test_one_to_one(srs):
    assert verify_standalone(one_to_one(srs, row(srs, [3, 1, 2, 5]), row(srs, [5, 3, 2, 1])), srs)
    with allow_invalid_witness():
        pf = one_to_one(srs, row(srs, [3, 1, 2, 5]), row(srs, [5, 3, 2, 2]))
    assert not verify_standalone(pf, srs)


def test_ordered_examples(srs):
    f = row(srs, signed([3, 1, 2, 0]))
    assert verify_standalone(ordered_check(srs, f, row(srs, signed([3, 2, 1, 0]))), srs)
    f = row(srs, signed([3, 1, 2, -4]))
    assert verify_standalone(ordered_check(srs, f, row(srs, signed([-4, 1, 2, 3])), "ascending"), srs)


def test_ordered_unsorted_rejected_at_range(srs):
    f = row(srs, signed([3, 1, 2, 0]))
    with allow_invalid_witness():
        pf = ordered_check(srs, f, row(srs, signed([3, 1, 2, 0])))
    v = verify_standalone_report(pf, srs)
    assert not v.ok and v.component == "range"


def test_max_examples(srs):
    f = row(srs, signed([4, 9, 2, 7]))
    assert verify_standalone(max_proof(srs, f, row(srs, signed([9]))), srs)
    with pytest.raises(WitnessInvalidError):
        max_proof(srs, f, row(srs, signed([7])))
    with allow_invalid_witness():
        pf = max_proof(srs, f, row(srs, signed([7])))
    assert not verify_standalone(pf, srs)


def test_max_negative_values(srs):
    f = row(srs, signed([-5, -9, -2, -7]))
    assert verify_standalone(max_proof(srs, f, row(srs, signed([-2]))), srs)


def slice_map(n, lo, hi, pad=None):
    sigma = list(range(lo, hi))
    if pad is not None:
        sigma += [("pad", pad)] * (4 - len(sigma))
    return PermutationMap.build(1, n, 1, 4, sigma)


def test_copy_constraint_slice(srs):
    src = list(range(10, 18))
    pm = slice_map(8, 2, 6)
    assert verify_standalone(copy_constraint(srs, [row(srs, src)], [row(srs, src[2:6])], pm, b"c"), srs)


def test_copy_constraint_forged_pad_rejected(srs):
    src = list(range(10, 18))
    pm = slice_map(8, 2, 5, pad=0)
    good = copy_constraint(srs, [row(srs, src)], [row(srs, src[2:5] + [0])], pm, b"c")
    assert verify_standalone(good, srs)
    with pytest.raises(WitnessInvalidError):
        copy_constraint(srs, [row(srs, src)], [row(srs, src[2:5] + [1])], pm, b"c")
    with allow_invalid_witness():
        bad = copy_constraint(srs, [row(srs, src)], [row(srs, src[2:5] + [1])], pm, b"c")
    assert not verify_standalone(bad, srs)


def test_copy_constraint_unconstrained_slot(srs):
    pm = PermutationMap.build(1, 4, 1, 4, [0, None, 2, 3])
    assert verify_standalone(copy_constraint(srs, [row(srs, [1, 2, 3, 4])], [row(srs, [1, 99, 3, 4])], pm), srs)


def test_divide_values():
    q, r = divide_values([7, 9], 4)
    assert q == [1, 2] and r == [3, 1]
    q, r = divide_values(signed([-7]), 4)
    assert q == signed([-2]) and r == [1]


def test_div_mod_examples(srs):
    a = row(srs, [7, 9, 0, 4])
    q, r = divide_values(a.values, 4)
    for mode in ("Div", "Mod"):
        assert verify_standalone(div_mod_prove(srs, a, 4, row(srs, q), row(srs, r), mode=mode), srs)
    # remainder equal to the divisor fails the slack range check
    q2, r2 = list(q), list(r)
    q2[0], r2[0] = 0, 7  # 7 = 0*4 + 7 breaks r < 4
    with pytest.raises(WitnessInvalidError):
        div_mod_prove(srs, a, 4, row(srs, q2), row(srs, r2))
    q3, r3 = list(q), list(r)
    q3[3], r3[3] = 0, 4
    with allow_invalid_witness():
        pf = div_mod_prove(srs, a, 4, row(srs, q3), row(srs, r3))
    v = verify_standalone_report(pf, srs)
    assert not v.ok and v.component == "slack_range"


def test_div_mod_dynamic_divisor(srs):
    a = row(srs, signed([7, -9, 30, 1]))
    b = row(srs, [4, 5, 6, 1])
    q, r = divide_values(a.values, list(b.values))
    assert verify_standalone(div_mod_prove(srs, a, b, row(srs, q), row(srs, r)), srs)


def test_gen_composites_verify(srs):
    g = Gen(srs, seed=5)
    for name in ("BooleanCheck", "Ordered", "MaxProof", "CopyConstraint", "DivMod"):
        for _ in range(3):
            assert verify_standalone(g.make(name), srs), name
