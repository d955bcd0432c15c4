"""Pairing-equation descriptors in relaxed form, and their evaluation.

A test is a sum of terms ``coeff * prod(scalars) * mu^(d-deg) * e(left, right)``.
``left`` names a G1 slot of the instance and ``right`` a G2 slot. Names that
start with ``$`` refer to fixed points owned by the test set (generators,
SRS powers, table commitments). ``deg`` counts the instance slots a term
touches, so every term becomes homogeneous of degree ``d`` in the folded
vector ``(mu, slots)``. At ``mu = 1`` the homogenising factor disappears and
the relaxed test is exactly the original verifier equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from ..algebra.curve import G1, G2, GT, msm, multi_pairing
from ..algebra.field import MODULUS as P
from ..algebra.field import inv


@dataclass(frozen=True)
class Term:
    coeff: int
    left: str
    right: str
    scalars: tuple[str, ...] = ()

    @property
    def degree(self) -> int:
        return (not self.left.startswith("$")) + (not self.right.startswith("$")) + len(self.scalars)


@dataclass(frozen=True)
class RelaxedTest:
    terms: tuple[Term, ...]
    label: str = ""


@dataclass(frozen=True)
class RelaxedTestSet:
    tests: tuple[RelaxedTest, ...]
    degree: int
    consts: Mapping[str, Union[G1, G2]] = field(default_factory=dict, compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.tests)


def term(coeff: int, left: str, right: str, *scalars: str) -> Term:
    return Term(coeff % P, left, right, tuple(scalars))


def build_testset(tests: Sequence[tuple[str, Sequence[Term]]], consts: Mapping[str, Union[G1, G2]]) -> RelaxedTestSet:
    rts = tuple(RelaxedTest(tuple(ts), label) for label, ts in tests)
    d = max((t.degree for rt in rts for t in rt.terms), default=1)
    return RelaxedTestSet(rts, max(d, 1), dict(consts))


def _lookup(name: str, values: Mapping, consts: Mapping):
    return consts[name] if name.startswith("$") else values[name]


def evaluate_test(test: RelaxedTest, values: Mapping, mu: int, degree: int, consts: Mapping) -> GT:
    """Value of one relaxed test (a GT element; zero means it holds with e = 0)."""
    groups: dict[str, tuple[G2, list, list]] = {}
    mu_pows = [1]
    for _ in range(degree):
        mu_pows.append(mu_pows[-1] * mu % P)
    for t in test.terms:
        s = t.coeff * mu_pows[degree - t.degree] % P
        for name in t.scalars:
            s = s * values[name] % P
        if s == 0:
            continue
        rhs = _lookup(t.right, values, consts)
        slot = groups.get(t.right)
        if slot is None:
            slot = groups[t.right] = (rhs, [], [])
        slot[1].append(_lookup(t.left, values, consts))
        slot[2].append(s)
    pairs = []
    for rhs, pts, scs in groups.values():
        lhs = pts[0] * scs[0] if len(pts) == 1 else msm(pts, scs)
        pairs.append((lhs, rhs))
    return multi_pairing(pairs)


def evaluate(ts: RelaxedTestSet, values: Mapping, mu: int) -> list[GT]:
    return [evaluate_test(t, values, mu, ts.degree, ts.consts) for t in ts.tests]


def combine_values(a: Mapping, b: Mapping, x: int) -> dict:
    """Slotwise x*a + b over G1, G2 and field slots."""
    out = {}
    for k, va in a.items():
        vb = b[k]
        if isinstance(va, int):
            out[k] = (x * va + vb) % P
        else:
            out[k] = va * x + vb
    return out


def _solve_vandermonde(d: int) -> list[list[int]]:
    """Inverse of V[k][j] = (k+1)^(j+1) for k, j < d-1 (nodes 1..d-1, powers 1..d-1)."""
    m = d - 1
    mat = [[pow(k + 1, j + 1, P) for j in range(m)] + [1 if i == k else 0 for i in range(m)] for k in range(m)]
    for col in range(m):
        piv = next(r for r in range(col, m) if mat[r][col])
        mat[col], mat[piv] = mat[piv], mat[col]
        iv = inv(mat[col][col])
        mat[col] = [v * iv % P for v in mat[col]]
        for r in range(m):
            if r != col and mat[r][col]:
                f = mat[r][col]
                mat[r] = [(vr - f * vc) % P for vr, vc in zip(mat[r], mat[col])]
    return [row[m:] for row in mat]


def cross_terms(ts: RelaxedTestSet, v: Mapping, mu: int, e: Sequence[GT],
                v2: Mapping, mu2: int, e2: Sequence[GT]) -> list[list[GT]]:
    """Error vectors e_1..e_{d-1} with T(Xv + v') = e' + sum_j e_j X^j + e X^d.

    The endpoints are the stored errors of the two inputs, so only the
    interior coefficients are solved for, from evaluations at X = 1..d-1.
    """
    d = ts.degree
    if d <= 1:
        return []
    samples = []
    for k in range(1, d):
        vk = combine_values(v, v2, k)
        muk = (k * mu + mu2) % P
        vals = evaluate(ts, vk, muk)
        kd = pow(k, d, P)
        samples.append([val - e2[i] - e[i] * kd for i, val in enumerate(vals)])
    vinv = _solve_vandermonde(d)
    out = []
    for j in range(d - 1):
        vec = []
        for i in range(len(ts.tests)):
            acc = GT.zero()
            for k in range(d - 1):
                acc = acc + samples[k][i] * vinv[j][k]
            vec.append(acc)
        out.append(vec)
    return out
