"""Sum, MatMul and Permute: univariate sumcheck over H in pairing-test form.

All three rest on one fact: for deg(L) < n, the sum of L over H_n is
n * L(0). Each block commits L = a*b restricted to H, the quotient of the
product by the vanishing polynomial, L(0) in the exponent, and (L - L(0))/X.
A shifted copy of the last one bounds deg(L) < n. Without that bound a
prover could add a multiple of X^n - 1 to L and move L(0) freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from ..algebra.curve import G1, G2, msm
from ..algebra.field import MODULUS as P
from ..algebra.field import inv, powers
from ..algebra.poly import Polynomial, domain_new, interpolate
from ..errors import ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from ..transcript import rho_nark
from .base import BlockKind, BlockProof, KindSpec, checks_enabled, derive_challenges, make_static, register, static_get
from .common import Row, commit_shifted, srs_consts
from .relaxed import build_testset, term


@dataclass(frozen=True)
class SharedRandomness:
    """Model-wide (alpha, beta), drawn after every edge commitment is absorbed."""

    alpha: int
    beta: int

    @classmethod
    def derive(cls, commitments: Sequence) -> "SharedRandomness":
        a = rho_nark("shared-randomness/alpha", list(commitments))
        b = rho_nark("shared-randomness/beta", a)
        return cls(a, b)


def degree_terms(q: str, p: str, bound: int):
    """Terms and slots bounding deg(q) <= bound (bound < 0 forces q = 0)."""
    if bound < 0:
        return [term(1, q, "$g2")], ()
    return [term(1, q, f"$deg:{bound}"), term(-1, p, "$g2")], (p,)


def _opt(slot: str, bound: int) -> tuple[str, ...]:
    return (slot,) if bound >= 0 else ()


@dataclass(frozen=True)
class SumcheckPart:
    L: G1
    l0: G1
    Ql: G1
    Ql0: G1
    Pl: G1 | None
    l0_value: int


def sumcheck_part(srs: Srs, a: Polynomial, b: Polynomial, n: int) -> SumcheckPart:
    """Commit L = a∘b on H_n, its vanishing quotient, L(0), (L-L(0))/X and the degree witness."""
    dom = domain_new(n)
    prod = a * b
    lv = dom.fft(prod.coeffs)
    L = Polynomial(dom.ifft(lv))
    q, r = (prod - L).divmod_vanishing(n)
    assert r.is_zero()
    l0 = L.coeffs[0] if L.coeffs else 0
    ql0 = Polynomial(L.coeffs[1:])
    pl = commit_shifted(srs, ql0, n - 2) if n >= 2 else None
    return SumcheckPart(srs.commit_coeffs(L.coeffs), srs.g1 * l0, srs.commit_coeffs(q.coeffs),
                        srs.commit_coeffs(ql0.coeffs), pl, l0)


def sumcheck_slots(suffix: str, n: int, constant: bool = True) -> tuple[str, ...]:
    """Slot names of one sumcheck; the right-hand part has no constant slot
    because its constant is pinned to (n/m) * L0 by the tests."""
    s = suffix
    head = (f"{s}", f"{s}0") if constant else (f"{s}",)
    return head + (f"Q{s}", f"Q{s}0") + _opt(f"P{s}", n - 2)


def sumcheck_values(part: SumcheckPart, constant: bool = True) -> tuple[G1, ...]:
    vals = (part.L, part.l0, part.Ql, part.Ql0) if constant else (part.L, part.Ql, part.Ql0)
    return vals + ((part.Pl,) if part.Pl is not None else ())


# Sum -----------------------------------------------------------------------

def _sum_slots(static):
    n = static_get(static, "n")
    return ("f", "g", "f1") + _opt("Pf", n - 2)


def _sum_tests(static, srs):
    n = static_get(static, "n")
    deg, _ = degree_terms("f1", "Pf", n - 2)
    tests = [
        ("sum", [term(1, "f", "$g2"), term(-inv(n), "g", "$g2"), term(-1, "f1", "$tau2")]),
        ("degree", deg),
    ]
    return build_testset(tests, srs_consts(srs, ["$g2", "$tau2"] + ([f"$deg:{n - 2}"] if n >= 2 else [])))


register(KindSpec(BlockKind.Sum, _sum_slots, lambda s: (), lambda s: (), _sum_tests))


def prove_sum(srs: Srs, f: Row, g) -> BlockProof:
    """g is the committed total: a length-1 Row or a bare G1 commitment (total * G)."""
    n = f.n
    gcom = g.com if isinstance(g, Row) else g
    if checks_enabled() and isinstance(g, Row) and sum(f.values) % P != g.values[0] % P:
        raise WitnessInvalidError("Sum: claimed total does not match")
    f1 = Polynomial(f.poly.coeffs[1:])
    g1 = [f.com, gcom, srs.commit_coeffs(f1.coeffs)]
    if n >= 2:
        g1.append(commit_shifted(srs, f1, n - 2))
    static = make_static(n=n)
    return BlockProof(BlockKind.Sum, static, (), tuple(g1), (), tuple(derive_challenges(BlockKind.Sum, static, (), {})))


# shared consts -------------------------------------------------------------

def _two_part_tests(prod1, prod2, n: int, m: int, extra=()):
    """Tests for two linked sumchecks: sum_{H_n} L = (n/m) * ... = sum_{H_m} R."""
    degl, _ = degree_terms("QL0", "PL", n - 2)
    degr, _ = degree_terms("QR0", "PR", m - 2)
    tests = [
        ("left-product", prod1 + [term(-1, "L", "$g2"), term(-1, "QL", f"$zh:{n}")]),
        *extra,
        ("left-constant", [term(1, "L", "$g2"), term(-1, "L0", "$g2"), term(-1, "QL0", "$tau2")]),
        ("right-product", prod2 + [term(-1, "R", "$g2"), term(-1, "QR", f"$zh:{m}")]),
        ("right-constant", [term(1, "R", "$g2"), term(-(n * inv(m)), "L0", "$g2"), term(-1, "QR0", "$tau2")]),
        ("left-degree", degl),
        ("right-degree", degr),
    ]
    names = ["$g1", "$g2", "$tau2", f"$zh:{n}", f"$zh:{m}"]
    names += [f"$deg:{b}" for b in (n - 2, m - 2) if b >= 0]
    return tests, names


# MatMul ---------------------------------------------------------------------

def _matmul_slots(static):
    n, m = static_get(static, "n"), static_get(static, "m")
    return ("A", "B", "C") + sumcheck_slots("L", n) + sumcheck_slots("R", m, False)


def _matmul_tests(static, srs):
    n, m = static_get(static, "n"), static_get(static, "m")
    dual = ("dual", [term(1, "$g1", "Bd"), term(-1, "B", "$g2")])
    tests, names = _two_part_tests([term(1, "A", "Bd")], [term(1, "C", "D")], n, m, extra=(dual,))
    return build_testset(tests, srs_consts(srs, names))


register(KindSpec(BlockKind.MatMul, _matmul_slots, lambda s: ("Bd", "D"), lambda s: (), _matmul_tests))


def combine_rows(rows: Sequence[Row], weights: Sequence[int], n: int) -> tuple[list[int], G1]:
    vals = [0] * n
    for r, w in zip(rows, weights):
        if w:
            for k, v in enumerate(r.values):
                vals[k] = (vals[k] + w * v) % P
    pts = [r.com for r, w in zip(rows, weights) if w]
    ws = [w for w in weights if w]
    com = msm(pts, ws) if pts else G1.zero()
    return vals, com


@lru_cache(maxsize=256)
def _weight_poly(weights: tuple[int, ...]) -> Polynomial:
    return interpolate(list(weights), domain_new(len(weights)))


def weight_commitment_g2(srs: Srs, weights: Sequence[int]) -> G2:
    key = ("wg2", tuple(weights))
    return srs.cached(key, lambda: srs.commit_coeffs_g2(_weight_poly(tuple(weights)).coeffs))


def matmul_derived(srs: Srs, A: Sequence, B: Sequence, C: Sequence, rand: SharedRandomness, m_logical: int, m: int):
    """Verifier-side derivation of the A, B, C, D instance slots from row commitments."""
    ai = powers(rand.alpha, len(A))
    bj = powers(rand.beta, len(B))
    a = msm(list(A), ai) if A else G1.zero()
    b = msm(list(B), bj) if B else G1.zero()
    c = msm(list(C), ai) if C else G1.zero()
    d = [bj[j] if j < m_logical else 0 for j in range(m)]
    return a, b, c, weight_commitment_g2(srs, d)


def prove_matmul(srs: Srs, A: Sequence[Row], B: Sequence[Row], C: Sequence[Row], rand: SharedRandomness) -> BlockProof:
    """Prove C = A·B^T for A: l×n, B: m'×n, C: l×m (m' <= m logical columns of C)."""
    if not A or not B or not C:
        raise ShapeError("MatMul: empty operand")
    n, m = A[0].n, C[0].n
    if any(r.n != n for r in list(A) + list(B)) or any(r.n != m for r in C) or len(A) != len(C) or len(B) > m:
        raise ShapeError("MatMul: inconsistent dimensions")
    m_log = len(B)
    if checks_enabled():
        for i, arow in enumerate(A):
            for j in range(m):
                want = sum(x * y for x, y in zip(arow.values, B[j].values)) % P if j < m_log else C[i].values[j]
                if C[i].values[j] != want:
                    raise WitnessInvalidError(f"MatMul: C[{i}][{j}] != (A B^T)[{i}][{j}]")
    ai = powers(rand.alpha, len(A))
    bj = powers(rand.beta, m_log)
    a_vals, a_com = combine_rows(A, ai, n)
    b_vals, b_com = combine_rows(B, bj, n)
    c_vals, c_com = combine_rows(C, ai, m)
    d_vals = [bj[j] if j < m_log else 0 for j in range(m)]
    dn, dm = domain_new(n), domain_new(m)
    a_poly, b_poly = interpolate(a_vals, dn), interpolate(b_vals, dn)
    c_poly, d_poly = interpolate(c_vals, dm), _weight_poly(tuple(d_vals))
    left = sumcheck_part(srs, a_poly, b_poly, n)
    right = sumcheck_part(srs, c_poly, d_poly, m)
    if checks_enabled() and (right.l0_value * m - left.l0_value * n) % P:
        raise WitnessInvalidError("MatMul: sums disagree")
    bd = srs.commit_coeffs_g2(b_poly.coeffs)
    g1 = (a_com, b_com, c_com) + sumcheck_values(left) + sumcheck_values(right, False)
    static = make_static(n=n, m=m)
    return BlockProof(BlockKind.MatMul, static, (), g1, (bd, weight_commitment_g2(srs, d_vals)),
                      tuple(derive_challenges(BlockKind.MatMul, static, (), {})))


# Permute --------------------------------------------------------------------

def _permute_slots(static):
    n, m = static_get(static, "n"), static_get(static, "n2")
    return ("A", "B") + sumcheck_slots("L", n) + sumcheck_slots("R", m, False)


def _permute_tests(static, srs):
    n, m = static_get(static, "n"), static_get(static, "n2")
    tests, names = _two_part_tests([term(1, "A", "Cd")], [term(1, "B", "Dd")], n, m)
    return build_testset(tests, srs_consts(srs, names))


register(KindSpec(BlockKind.Permute, _permute_slots, lambda s: ("Cd", "Dd"), lambda s: (), _permute_tests))


def permute_weights(alpha: int, m: int, n_log: int, n: int, p0: Sequence[int], p1: Sequence[int], n2_log: int, n2: int):
    """Row/col weights for source (row-major flat index) and destination (via p0, p1)."""
    rows_a = [pow(alpha, i * n_log, P) for i in range(m)]
    cols_a = [pow(alpha, j, P) if j < n_log else 0 for j in range(n)]
    rows_b = [pow(alpha, k, P) for k in p0]
    cols_b = [pow(alpha, p1[j], P) if j < n2_log else 0 for j in range(n2)]
    return rows_a, cols_a, rows_b, cols_b


def permute_derived(srs: Srs, A: Sequence, B: Sequence, rand: SharedRandomness, n_log: int, n: int,
                    p0: Sequence[int], p1: Sequence[int], n2_log: int, n2: int):
    ra, ca, rb, cb = permute_weights(rand.alpha, len(A), n_log, n, p0, p1, n2_log, n2)
    return (msm(list(A), ra), msm(list(B), rb), weight_commitment_g2(srs, ca), weight_commitment_g2(srs, cb))


def prove_permute(srs: Srs, A: Sequence[Row], B: Sequence[Row], p0: Sequence[int], p1: Sequence[int],
                  rand: SharedRandomness, n_log: int | None = None, n2_log: int | None = None) -> BlockProof:
    """B[i2][j2] = A_flat[p0[i2] + p1[j2]] where A_flat is the row-major logical flattening of A."""
    n, n2 = A[0].n, B[0].n
    n_log = n if n_log is None else n_log
    n2_log = n2 if n2_log is None else n2_log
    if len(p0) != len(B) or len(p1) < n2_log:
        raise ShapeError("Permute: index maps do not match B")
    if checks_enabled():
        flat = [v for r in A for v in r.values[:n_log]]
        for i2, row in enumerate(B):
            for j2 in range(n2_log):
                k = p0[i2] + p1[j2]
                if not 0 <= k < len(flat) or row.values[j2] != flat[k]:
                    raise WitnessInvalidError(f"Permute: B[{i2}][{j2}] is not A_flat[{k}]")
    ra, ca, rb, cb = permute_weights(rand.alpha, len(A), n_log, n, p0, p1, n2_log, n2)
    a_vals, a_com = combine_rows(A, ra, n)
    b_vals, b_com = combine_rows(B, rb, n2)
    dn, dm = domain_new(n), domain_new(n2)
    left = sumcheck_part(srs, interpolate(a_vals, dn), _weight_poly(tuple(ca)), n)
    right = sumcheck_part(srs, interpolate(b_vals, dm), _weight_poly(tuple(cb)), n2)
    g1 = (a_com, b_com) + sumcheck_values(left) + sumcheck_values(right, False)
    static = make_static(n=n, n2=n2)
    return BlockProof(BlockKind.Permute, static, (), g1,
                      (weight_commitment_g2(srs, ca), weight_commitment_g2(srs, cb)),
                      tuple(derive_challenges(BlockKind.Permute, static, (), {})))
