"""CQ and CQ2 lookups: cached-quotient log-derivative arguments.

Preprocessing fixes, for a table on the size-N domain V:

* ``[T(tau)]_2``
* ``[L_i(tau)]_1``
* cached quotients ``[L_i(T - t_i)/Z_V]_1``
* ``[(L_i - 1/N)/X]_1`` and its shift that bounds degree

After that, proving costs O(n) group operations in the lookup length n,
independent of N. The log-derivative identity
``sum 1/(f_j + beta) = sum m_i/(t_i + beta)`` is checked with pairings only.
Each side is a sumcheck over its own domain, tied together through a single
committed ``A(0)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..algebra.curve import G1, G2, msm
from ..algebra.field import MODULUS as P
from ..algebra.field import batch_inv, encode_signed, inv, next_pow2
from ..algebra.poly import Polynomial, domain_new, interpolate
from ..errors import ConfigurationError, DegreeError, ShapeError, WitnessInvalidError
from ..pcs.group_fft import group_fft, group_ifft
from ..pcs.kzg import Srs, lagrange_basis_g1
from .aurora import degree_terms
from .base import BlockKind, BlockProof, KindSpec, checks_enabled, derive_challenges, make_static, register, static_get
from .common import Row, commit_shifted, srs_consts
from .relaxed import build_testset, term


@dataclass(frozen=True)
class LookupTable:
    """A public table: the set {inputs} (CQ) or the map inputs -> outputs (CQ2)."""

    inputs: tuple[int, ...]
    outputs: Optional[tuple[int, ...]] = None
    name: str = ""

    @classmethod
    def from_signed(cls, inputs: Sequence[int], outputs: Optional[Sequence[int]] = None, name: str = "") -> "LookupTable":
        ins = tuple(encode_signed(v) for v in inputs)
        outs = None if outputs is None else tuple(encode_signed(v) for v in outputs)
        return cls(ins, outs, name)

    @classmethod
    def range(cls, lo: int, hi: int, name: str = "") -> "LookupTable":
        """The set {lo, ..., hi-1}."""
        return cls.from_signed(range(lo, hi), None, name or f"range[{lo},{hi})")

    @classmethod
    def function(cls, fn, lo: int, hi: int, name: str = "") -> "LookupTable":
        xs = list(range(lo, hi))
        return cls.from_signed(xs, [fn(x) for x in xs], name)

    @property
    def is_map(self) -> bool:
        return self.outputs is not None

    @property
    def size(self) -> int:
        return next_pow2(len(self.inputs))

    def padded(self) -> tuple[tuple[int, ...], Optional[tuple[int, ...]]]:
        n = self.size
        ins = self.inputs + (self.inputs[0],) * (n - len(self.inputs))
        outs = None if self.outputs is None else self.outputs + (self.outputs[0],) * (n - len(self.outputs))
        return ins, outs

    def digest(self) -> bytes:
        h = hashlib.sha3_256(b"zkt/table")
        h.update(len(self.inputs).to_bytes(8, "little"))
        for v in self.inputs:
            h.update(v.to_bytes(32, "little"))
        if self.outputs is not None:
            h.update(b"map")
            for v in self.outputs:
                h.update(v.to_bytes(32, "little"))
        return h.digest()

    def lookup(self, x: int) -> int:
        return self._index()[x % P][1]

    def _index(self) -> dict:
        cache = self.__dict__.get("_idx")
        if cache is None:
            ins, outs = self.padded()
            cache = {}
            for i, v in enumerate(ins):
                cache.setdefault(v, (i, outs[i] if outs else v))
            object.__setattr__(self, "_idx", cache)
        return cache

    def index_of(self, x: int) -> int:
        return self._index()[x % P][0]

    def contains(self, x: int) -> bool:
        return x % P in self._index()


@dataclass
class PreprocessedTable:
    table: LookupTable
    N: int
    t_in: tuple[int, ...]
    t_out: Optional[tuple[int, ...]]
    T_in2: G2
    T_out2: Optional[G2]
    lag: list
    q_in: list
    q_out: Optional[list]
    a0: list
    pa: list
    digest: bytes = field(default=b"")


def table_commitment_g2(srs: Srs, values: Sequence[int]) -> G2:
    """[T(tau)]_2 from public points only (used by verifiers)."""
    n = len(values)
    if n > srs.max_degree:
        raise DegreeError(f"table of size {n} needs an SRS of degree >= {n}")
    return srs.commit_coeffs_g2(interpolate(list(values), domain_new(n)).coeffs)


def _cached_quotients_fk(srs: Srs, t_poly: Polynomial, N: int) -> list:
    """All [L_i (T - t_i)/Z_V]_1 via Feist-Khovratovich in O(N log N) group operations."""
    c = list(t_poly.coeffs) + [0] * (N - len(t_poly.coeffs))
    dom2 = domain_new(2 * N)
    u = list(reversed(srs.g1_powers[:N])) + [G1.zero()] * N
    u_hat = group_fft(u, dom2)
    c_hat = dom2.fft(c + [0] * N)
    conv = group_ifft([p * s for p, s in zip(u_hat, c_hat)], dom2)
    h = conv[N:2 * N - 1] + [G1.zero()]
    k = group_fft(h, domain_new(N))
    dom = domain_new(N)
    ninv = inv(N)
    return [ki * (dom.element(i) * ninv % P) for i, ki in enumerate(k)]


def preprocess_table(srs: Srs, table: LookupTable) -> PreprocessedTable:
    """Preprocess (and cache on the SRS) the commitments a lookup needs."""
    key = ("table", table.digest())

    def build() -> PreprocessedTable:
        N = table.size
        if N > srs.max_degree:
            raise ConfigurationError(f"table {table.name or '?'} of size {N} needs an SRS of degree >= {N}")
        t_in, t_out = table.padded()
        dom = domain_new(N)
        tin_poly = interpolate(list(t_in), dom)
        tout_poly = interpolate(list(t_out), dom) if t_out else None
        shift = srs.degree_shift(N - 2) if N >= 2 else None
        tau = srs.test_trapdoor
        if tau is not None:
            lv = dom.lagrange_evals(tau)
            zv_inv = inv(dom.vanishing_eval(tau))
            ninv = inv(N)
            tau_inv = inv(tau)
            g = srs.g1
            lag = [g * l for l in lv]
            tin_tau = tin_poly(tau)
            q_in = [g * (l * (tin_tau - t) % P * zv_inv) for l, t in zip(lv, t_in)]
            q_out = None
            if tout_poly is not None:
                tout_tau = tout_poly(tau)
                q_out = [g * (l * (tout_tau - t) % P * zv_inv) for l, t in zip(lv, t_out)]
            a0_s = [(l - ninv) * tau_inv % P for l in lv]
            a0 = [g * s for s in a0_s]
            pa = [g * (s * pow(tau, shift, P) % P) for s in a0_s] if shift is not None else []
        else:
            lag = lagrange_basis_g1(srs, N)
            q_in = _cached_quotients_fk(srs, tin_poly, N)
            q_out = _cached_quotients_fk(srs, tout_poly, N) if tout_poly is not None else None
            top = srs.g1_powers[N - 1] * inv(N)
            a0 = [li * dom.element(-i) - top for i, li in enumerate(lag)]
            if shift is not None:
                w = [G1.zero()] + [srs.g1_powers[shift + k - 1] for k in range(1, N)]
                pa = group_ifft(w, dom)
            else:
                pa = []
        T_in2 = srs.commit_coeffs_g2(tin_poly.coeffs)
        T_out2 = srs.commit_coeffs_g2(tout_poly.coeffs) if tout_poly is not None else None
        return PreprocessedTable(table, N, t_in, t_out, T_in2, T_out2, lag, q_in, q_out, a0, pa, table.digest())

    return srs.cached(key, build)


def get_preprocessed(srs: Srs, table: LookupTable) -> PreprocessedTable:
    pre = srs._cache.get(("table", table.digest()))
    if pre is None:
        raise ConfigurationError(f"table {table.name or table.digest().hex()[:12]} has not been preprocessed for this SRS")
    return pre


def _table_tests(N: int, n: int, maplike: bool, srs: Srs, static) -> tuple[list, dict]:
    f = "fc" if maplike else "f"
    table_terms = [term(1, "A", "$Tin2")]
    if maplike:
        table_terms.append(term(1, "A", "$Tout2", "lam"))
    table_terms += [term(1, "A", "$g2", "beta"), term(-1, "m", "$g2"), term(-1, "QA", f"$zh:{N}")]
    deg_a, _ = degree_terms("A0", "PA", N - 2)
    deg_b, _ = degree_terms("B0", "PB", n - 2)
    tests = [
        ("table", table_terms),
        ("table-constant", [term(1, "A", "$g2"), term(-1, "a0", "$g2"), term(-1, "A0", "$tau2")]),
        ("table-degree", deg_a),
        ("input", [term(1, f, "Bd"), term(1, "B", "$g2", "beta"), term(-1, "$g1", "$g2"), term(-1, "QB", f"$zh:{n}")]),
        ("dual", [term(1, "$g1", "Bd"), term(-1, "B", "$g2")]),
        ("input-constant", [term(1, "B", "$g2"), term(-(N * inv(n)), "a0", "$g2"), term(-1, "B0", "$tau2")]),
        ("input-degree", deg_b),
    ]
    if maplike:
        tests.insert(0, ("combine", [term(1, "fc", "$g2"), term(-1, "fin", "$g2"), term(-1, "fout", "$g2", "lam")]))
    names = ["$g1", "$g2", "$tau2", f"$zh:{N}", f"$zh:{n}"] + [f"$deg:{b}" for b in (N - 2, n - 2) if b >= 0]
    consts = srs_consts(srs, names)
    consts["$Tin2"] = static_get(static, "T_in2")
    if maplike:
        consts["$Tout2"] = static_get(static, "T_out2")
    return tests, consts


def _common_slots(N: int, n: int) -> tuple[str, ...]:
    return ("m", "A", "QA", "A0", "a0") + (("PA",) if N >= 2 else ()) + ("B", "QB", "B0") + (("PB",) if n >= 2 else ())


def _cq_slots(static):
    return ("f",) + _common_slots(static_get(static, "N"), static_get(static, "n"))


def _cq2_slots(static):
    return ("fin", "fout", "fc") + _common_slots(static_get(static, "N"), static_get(static, "n"))


def _cq_tests(static, srs):
    tests, consts = _table_tests(static_get(static, "N"), static_get(static, "n"), False, srs, static)
    return build_testset(tests, consts)


def _cq2_tests(static, srs):
    tests, consts = _table_tests(static_get(static, "N"), static_get(static, "n"), True, srs, static)
    return build_testset(tests, consts)


register(KindSpec(BlockKind.CQ, _cq_slots, lambda s: ("Bd",), lambda s: (("beta", ("f", "m")),), _cq_tests))
register(KindSpec(BlockKind.CQ2, _cq2_slots, lambda s: ("Bd",),
                  lambda s: (("lam", ("fin", "fout", "m")), ("beta", ("fc",))), _cq2_tests))


def cq_static(pre: PreprocessedTable, n: int, maplike: bool):
    if maplike:
        return make_static(table=pre.digest, N=pre.N, n=n, T_in2=pre.T_in2, T_out2=pre.T_out2)
    return make_static(table=pre.digest, N=pre.N, n=n, T_in2=pre.T_in2)


def public_cq_static(srs: Srs, table: LookupTable, n: int, maplike: bool):
    """The static a verifier expects for a lookup into ``table``, from public SRS points only."""
    def build():
        t_in, t_out = table.padded()
        t_out2 = table_commitment_g2(srs, t_out) if (maplike and t_out) else None
        return table_commitment_g2(srs, t_in), t_out2

    t_in2, t_out2 = srs.cached(("table-public", table.digest(), maplike), build)
    if maplike:
        return make_static(table=table.digest(), N=table.size, n=n, T_in2=t_in2, T_out2=t_out2)
    return make_static(table=table.digest(), N=table.size, n=n, T_in2=t_in2)


def _multiplicities(pre: PreprocessedTable, keys: Sequence[int]) -> dict[int, int]:
    m: dict[int, int] = {}
    idx = pre.table._index()
    for j, v in enumerate(keys):
        hit = idx.get(v)
        if hit is None:
            if checks_enabled():
                raise WitnessInvalidError(f"lookup value at position {j} is not in table {pre.table.name or ''}")
            continue
        m[hit[0]] = m.get(hit[0], 0) + 1
    return m


def _table_side(srs: Srs, pre: PreprocessedTable, m: dict[int, int], denoms: dict[int, int], lam: Optional[int]):
    items = sorted(m)
    if not items:
        z = G1.zero()
        return z, z, z, z, z, (z if pre.pa else None)
    mi = [m[i] for i in items]
    d_inv = batch_inv([denoms[i] for i in items])
    a = [x * y % P for x, y in zip(mi, d_inv)]
    m_com = msm([pre.lag[i] for i in items], mi)
    A = msm([pre.lag[i] for i in items], a)
    if lam is None:
        QA = msm([pre.q_in[i] for i in items], a)
    else:
        QA = msm([pre.q_in[i] for i in items] + [pre.q_out[i] for i in items], a + [x * lam % P for x in a])
    A0 = msm([pre.a0[i] for i in items], a)
    a0 = srs.g1 * (sum(a) * inv(pre.N) % P)
    PA = msm([pre.pa[i] for i in items], a) if pre.pa else None
    return m_com, A, QA, A0, a0, PA


def _input_side(srs: Srs, f_vals: Sequence[int], f_poly: Polynomial, beta: int):
    n = len(f_vals)
    dom = domain_new(n)
    b_vals = batch_inv([(v + beta) % P for v in f_vals])
    B = interpolate(b_vals, dom)
    num = B * (f_poly + beta) - 1
    QB, rem = num.divmod_vanishing(n)
    if checks_enabled() and not rem.is_zero():
        raise WitnessInvalidError("lookup: inverse polynomial inconsistent")
    B0 = Polynomial(B.coeffs[1:])
    PB = commit_shifted(srs, B0, n - 2) if n >= 2 else None
    return (srs.commit_coeffs(B.coeffs), srs.commit_coeffs(QB.coeffs), srs.commit_coeffs(B0.coeffs), PB,
            srs.commit_coeffs_g2(B.coeffs), B)


def _assemble(head, tail_a, tail_b) -> tuple:
    m_com, A, QA, A0, a0, PA = tail_a
    Bc, QBc, B0c, PB, _bd, _ = tail_b
    out = list(head) + [m_com, A, QA, A0, a0]
    if PA is not None:
        out.append(PA)
    out += [Bc, QBc, B0c]
    if PB is not None:
        out.append(PB)
    return tuple(out)


def prove_cq(srs: Srs, f: Row, table: LookupTable) -> BlockProof:
    """Prove every entry of f lies in the table set."""
    pre = get_preprocessed(srs, table)
    n = f.n
    if n > srs.max_degree:
        raise ShapeError("lookup vector longer than the SRS")
    m = _multiplicities(pre, f.values)
    m_com = msm([pre.lag[i] for i in m], list(m.values())) if m else G1.zero()
    static = cq_static(pre, n, False)
    (beta,) = derive_challenges(BlockKind.CQ, static, (), {"f": f.com, "m": m_com})
    denoms = {i: (pre.t_in[i] + beta) % P for i in m}
    ta = _table_side(srs, pre, m, denoms, None)
    tb = _input_side(srs, f.values, f.poly, beta)
    g1 = _assemble([f.com], ta, tb)
    return BlockProof(BlockKind.CQ, static, (), g1, (tb[4],), (beta,))


def prove_cq2(srs: Srs, fin: Row, fout: Row, table: LookupTable) -> BlockProof:
    """Prove every pair (fin_j, fout_j) is a row of the table map."""
    if not table.is_map:
        raise ConfigurationError("CQ2 needs a map table (inputs and outputs)")
    pre = get_preprocessed(srs, table)
    n = fin.n
    if fout.n != n:
        raise ShapeError("CQ2: input and output rows must share a domain")
    idx = table._index()
    keys = []
    for j, (x, y) in enumerate(zip(fin.values, fout.values)):
        hit = idx.get(x)
        if checks_enabled() and (hit is None or hit[1] != y):
            raise WitnessInvalidError(f"CQ2: pair at position {j} is not in table {table.name or ''}")
        keys.append(x)
    m = _multiplicities(pre, keys)
    m_com = msm([pre.lag[i] for i in m], list(m.values())) if m else G1.zero()
    static = cq_static(pre, n, True)
    lam = derive_challenges(BlockKind.CQ2, static, (), {"fin": fin.com, "fout": fout.com, "m": m_com, "fc": G1.zero()})[0]
    fc_com = fin.com + fout.com * lam
    _, beta = derive_challenges(BlockKind.CQ2, static, (), {"fin": fin.com, "fout": fout.com, "m": m_com, "fc": fc_com})
    fc_vals = [(a + lam * b) % P for a, b in zip(fin.values, fout.values)]
    fc_poly = fin.poly + fout.poly.scale(lam)
    denoms = {i: (pre.t_in[i] + lam * pre.t_out[i] + beta) % P for i in m}
    ta = _table_side(srs, pre, m, denoms, lam)
    tb = _input_side(srs, fc_vals, fc_poly, beta)
    g1 = _assemble([fin.com, fout.com, fc_com], ta, tb)
    return BlockProof(BlockKind.CQ2, static, (), g1, (tb[4],), (lam, beta))
