import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zkt.algebra import (G1, G2, GT, MODULUS as P, Polynomial, decode_signed, domain_new, encode_signed, interpolate,
                         multi_pairing, pairing, quotient_by_vanishing, quotient_linear)
from zkt.algebra.poly import evaluate_on, poly_mul
from zkt.errors import ConfigurationError, ShapeError, WitnessInvalidError

field = st.integers(min_value=0, max_value=P - 1)


# domains ----------------------------------------------------------------------

def test_domain_trivial():
    d = domain_new(1)
    assert d.omega == 1


def test_domain_four():
    w = domain_new(4).omega
    assert pow(w, 4, P) == 1 and pow(w, 2, P) != 1


def test_domain_sixteen_powers_distinct():
    d = domain_new(16)
    powers = [pow(d.omega, i, P) for i in range(16)]
    assert len(set(powers)) == 16
    assert pow(d.omega, 16, P) == 1


@pytest.mark.parametrize("n", [0, 3, 12, 1 << 29])
def test_domain_unsupported(n):
    with pytest.raises(ConfigurationError):
        domain_new(n)


# interpolation -----------------------------------------------------------------

def test_interpolate_zero_and_constant():
    d = domain_new(8)
    assert interpolate([0] * 8, d).is_zero()
    c = interpolate([5] * 8, d)
    assert c.degree == 0 and c.coeffs == (5,)


def test_interpolate_roundtrip_random_vector():
    rng = random.Random(1)
    d = domain_new(8)
    v = [rng.randrange(P) for _ in range(8)]
    f = interpolate(v, d)
    assert [f(pow(d.omega, i, P)) for i in range(8)] == v


def test_interpolate_length_mismatch():
    with pytest.raises(ShapeError):
        interpolate([1, 2, 3], domain_new(4))


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=10).flatmap(lambda k: st.lists(field, min_size=1 << k, max_size=1 << k)))
def test_fft_roundtrip(v):
    d = domain_new(len(v))
    assert evaluate_on(interpolate(v, d), d) == v


# quotients ---------------------------------------------------------------------

def test_quotient_vanishing_examples():
    d = domain_new(8)
    zh = Polynomial.monomial(8) - Polynomial.constant(1)
    assert quotient_by_vanishing(zh, d) == Polynomial.constant(1)
    assert quotient_by_vanishing(Polynomial(), d).is_zero()
    t = Polynomial([3, 1])
    assert quotient_by_vanishing(zh * t, d) == t


def test_quotient_vanishing_rejects_remainder():
    d = domain_new(4)
    with pytest.raises(WitnessInvalidError):
        quotient_by_vanishing(Polynomial([1, 0, 0, 0, 1]), d)


@settings(max_examples=30)
@given(st.lists(field, min_size=0, max_size=40), st.sampled_from([1, 2, 4, 8, 16]))
def test_quotient_vanishing_remultiply(t, n):
    zh = Polynomial.monomial(n) - Polynomial.constant(1)
    num = zh * Polynomial(t)
    assert zh * quotient_by_vanishing(num, domain_new(n)) == num


def test_quotient_linear_examples():
    assert quotient_linear(Polynomial.constant(7), 3, 7).is_zero()
    assert quotient_linear(Polynomial.monomial(2), 1, 1) == Polynomial([1, 1])
    with pytest.raises(WitnessInvalidError):
        quotient_linear(Polynomial.monomial(2), 1, 2)


def test_quotient_linear_random_evaluation_oracle():
    rng = random.Random(7)
    f = Polynomial([rng.randrange(P) for _ in range(8)])
    x = rng.randrange(P)
    y = f(x)
    q = quotient_linear(f, x, y)
    for _ in range(10):
        t = rng.randrange(P)
        assert q(t) * (t - x) % P == (f(t) - y) % P


@settings(max_examples=20)
@given(st.lists(field, max_size=90), st.lists(field, max_size=90))
def test_fft_multiplication_matches_schoolbook(a, b):
    want = [0] * max(len(a) + len(b) - 1, 0)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            want[i + j] = (want[i + j] + x * y) % P
    assert Polynomial(poly_mul(a, b)) == Polynomial(want)


def test_polynomial_ops():
    f, g = Polynomial([1, 2]), Polynomial([3, 0, 1])
    assert (f + g).coeffs == (4, 2, 1)
    assert (g - g).is_zero()
    assert (f * g)(5) == f(5) * g(5) % P
    assert f.scale(3).coeffs == (3, 6)
    q, r = g.divmod_linear(2)
    assert r == g(2) and q * Polynomial([P - 2, 1]) + Polynomial.constant(r) == g


# signed encoding ----------------------------------------------------------------

@given(st.integers(min_value=-(1 << 100), max_value=1 << 100))
def test_signed_roundtrip(v):
    assert decode_signed(encode_signed(v)) == v


# curve --------------------------------------------------------------------------

def test_pairing_bilinearity_100():
    rng = random.Random(3)
    base = pairing(G1.generator(), G2.generator())
    for _ in range(100):
        a, b = rng.randrange(1, P), rng.randrange(1, P)
        assert pairing(G1.generator() * a, G2.generator() * b) == base * (a * b % P)


def test_pairing_nondegenerate_and_multi():
    g1, g2 = G1.generator(), G2.generator()
    assert not pairing(g1, g2).is_zero()
    assert multi_pairing([(g1 * 3, g2), (-(g1 * 3), g2)]).is_zero()
    assert multi_pairing([(g1, g2 * 2), (g1 * 5, g2)]) == pairing(g1, g2) * 7


def test_group_serialization_roundtrip():
    rng = random.Random(4)
    for cls in (G1, G2):
        p = cls.generator() * rng.randrange(1, P)
        assert cls.from_bytes(p.to_bytes()) == p
        assert cls.from_bytes(cls.zero().to_bytes()).is_zero()
    t = pairing(G1.generator(), G2.generator()) * 11
    assert GT.from_bytes(t.to_bytes()) == t
