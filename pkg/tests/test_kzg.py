import dataclasses
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zkt.algebra import G1, MODULUS as P, Polynomial, multi_pairing, pairing
from zkt.errors import ConfigurationError, DegreeError, FormatError
from zkt.pcs import (batch_open, commit, commit_g2, load_srs, open, save_srs, setup, srs_from_bytes, srs_to_bytes,
                     verify_batch, verify_open)
from zkt.pcs.kzg import SRS_MAGIC


def rand_poly(rng, deg):
    return Polynomial([rng.randrange(P) for _ in range(deg + 1)])


def test_setup_degree_one():
    s = setup(b"seed", 1)
    tau = s.test_trapdoor
    assert list(s.g1_powers) == [G1.generator(), G1.generator() * tau]
    assert s.max_degree == 1


def test_setup_deterministic():
    assert srs_to_bytes(setup(b"same", 16)) == srs_to_bytes(setup(b"same", 16))
    assert srs_to_bytes(setup(b"same", 16)) != srs_to_bytes(setup(b"other", 16))


def test_setup_pairing_consistency(srs):
    s = setup(b"pairing", 256)
    assert pairing(s.g1_powers[3], s.g2_powers[5]) == pairing(s.g1_powers[8], s.g2_powers[0])
    rng = random.Random(0)
    for _ in range(5):
        i, j = rng.randrange(128), rng.randrange(128)
        assert pairing(srs.g1_powers[i], srs.g2_powers[j]) == pairing(srs.g1_powers[i + j], srs.g2_powers[0])


def test_setup_errors(monkeypatch):
    with pytest.raises(ConfigurationError):
        setup(b"x", 0)
    monkeypatch.setenv("ZKT_SRS_MAX_DEGREE", "64")
    with pytest.raises(ConfigurationError):
        setup(b"x", 65)


def test_commit_examples(srs):
    assert commit(srs, Polynomial()).point.is_zero()
    assert commit(srs, Polynomial.constant(1)).point == G1.generator()
    with pytest.raises(DegreeError):
        commit(srs, Polynomial.monomial(srs.max_degree + 1))


def test_commit_homomorphism(srs):
    rng = random.Random(1)
    f, g = rand_poly(rng, 30), rand_poly(rng, 50)
    assert (commit(srs, f) + commit(srs, g)).point == commit(srs, f + g).point


def test_dual_commitment(srs):
    f = rand_poly(random.Random(2), 20)
    c1, c2 = commit(srs, f), commit_g2(srs, f)
    assert pairing(srs.g1, c2.point) == pairing(c1.point, srs.g2)


def test_hiding(srs):
    f = rand_poly(random.Random(3), 10)
    a, b = commit(srs, f, blinder=5), commit(srs, f, blinder=6)
    assert a.point != b.point
    assert verify_open(srs, a, open(srs, f, 9, blinder=5))


@settings(max_examples=20)
@given(st.lists(st.integers(0, P - 1), min_size=1, max_size=65), st.lists(st.integers(0, P - 1), min_size=1,
                                                                          max_size=65))
def test_binding(srs, a, b):
    f, g = Polynomial(a), Polynomial(b)
    if f != g:
        assert commit(srs, f).point != commit(srs, g).point


def test_open_examples(srs):
    c = Polynomial.constant(42)
    pf = open(srs, c, 12345)
    assert pf.value == 42 and verify_open(srs, commit(srs, c), pf)
    sq = Polynomial.monomial(2)
    pf = open(srs, sq, 2)
    assert pf.value == 4 and verify_open(srs, commit(srs, sq), pf)


def test_open_wrong_commitment_rejects(srs):
    rng = random.Random(4)
    f, g = rand_poly(rng, 9), rand_poly(rng, 9)
    assert not verify_open(srs, commit(srs, g), open(srs, f, rng.randrange(P)))


def test_open_wrong_value_rejects(srs):
    f = rand_poly(random.Random(5), 9)
    pf = open(srs, f, 3)
    assert not verify_open(srs, commit(srs, f), dataclasses.replace(pf, value=(pf.value + 1) % P))


def test_completeness_200(srs):
    rng = random.Random(6)
    for k in range(200):
        x = rng.randrange(P)
        if k % 2:
            f = rand_poly(rng, rng.randrange(0, 40))
            assert verify_open(srs, commit(srs, f), open(srs, f, x))
        else:
            fs = [rand_poly(rng, rng.randrange(0, 40)) for _ in range(rng.randrange(1, 4))]
            gamma = rng.randrange(P)
            assert verify_batch(srs, [commit(srs, f) for f in fs], batch_open(srs, fs, x, gamma), gamma)


def test_batch_single_matches_open(srs):
    rng = random.Random(7)
    f = rand_poly(rng, 12)
    x, gamma = rng.randrange(P), rng.randrange(P)
    b, s = batch_open(srs, [f], x, gamma), open(srs, f, x)
    assert b.witness_point == s.witness_point and b.values == (s.value,)
    assert verify_batch(srs, [commit(srs, f)], b, gamma) == verify_open(srs, commit(srs, f), s)


def test_batch_perturbed_value_rejects_100_gammas(srs):
    rng = random.Random(8)
    fs = [rand_poly(rng, 20) for _ in range(3)]
    coms = [commit(srs, f) for f in fs]
    x = rng.randrange(P)
    for _ in range(100):
        gamma = rng.randrange(P)
        b = batch_open(srs, fs, x, gamma)
        assert verify_batch(srs, coms, b, gamma)
        vals = list(b.values)
        vals[1] = (vals[1] + 1) % P
        assert not verify_batch(srs, coms, dataclasses.replace(b, values=tuple(vals)), gamma)


def test_batch_length_mismatch_rejects(srs):
    f = Polynomial([1, 2, 3])
    b = batch_open(srs, [f, f], 5, 7)
    assert not verify_batch(srs, [commit(srs, f)], b, 7)


# serialization --------------------------------------------------------------------

def test_srs_bytes_roundtrip_and_no_trapdoor():
    s = setup(b"codec", 32)
    data = srs_to_bytes(s)
    assert data.startswith(SRS_MAGIC)
    assert int.from_bytes(data[8:16], "little") == 32
    back = srs_from_bytes(data)
    assert back.g1_powers == s.g1_powers and back.g2_powers == s.g2_powers
    assert back.test_trapdoor is None
    assert s.test_trapdoor.to_bytes(32, "big") not in data
    assert s.without_trapdoor().test_trapdoor is None


@pytest.mark.parametrize("cut", [0, 7, 12, 40, -1])
def test_srs_bytes_truncated(cut):
    data = srs_to_bytes(setup(b"codec", 8))
    with pytest.raises(FormatError):
        srs_from_bytes(data[:cut])


def test_srs_bad_magic():
    data = srs_to_bytes(setup(b"codec", 8))
    with pytest.raises(FormatError):
        srs_from_bytes(b"ZKTSRS99" + data[8:])


def test_save_load(tmp_path):
    s = setup(b"file", 16)
    p = tmp_path / "s.srs"
    save_srs(s, str(p))
    t = load_srs(str(p))
    assert t.g1_powers == s.g1_powers and t.digest() == s.digest()


def test_verifier_uses_public_points_only():
    s = setup(b"pub", 64)
    pub = s.without_trapdoor()
    f = rand_poly(random.Random(9), 30)
    assert verify_open(pub, commit(pub, f), open(pub, f, 77))
    assert multi_pairing([(pub.g1, pub.g2)]) == pairing(pub.g1, pub.g2)
