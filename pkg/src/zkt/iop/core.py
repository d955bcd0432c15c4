"""A KZG-based polynomial IOP for constraints that hold pointwise on H.

The prover commits to blinded witnesses ``f = g + (X^n - 1) b`` with
deg(b) = 3, then to one quotient per constraint. It opens everything at a
random zeta outside H (and the witnesses also at omega*zeta) with two
batched KZG proofs. Witnesses may be *linked* to an ordinary row commitment
C of a block edge. The proof then carries [b]_1 and the verifier checks
``F = C * S + [b]_1 * (X^N - 1)`` in the exponent. S is 1 for an edge on the
same domain and the interleaving polynomial for an edge on a subgroup.

Constraints are plain Python callables over an environment that exposes
witness values at x and omega*x, public column values, challenges and x.
The same callable runs pointwise on a coset (prover) and at zeta (verifier).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from ..algebra.curve import G1, G2, msm, multi_pairing
from ..algebra.field import MODULUS as P
from ..algebra.field import inv, next_pow2
from ..algebra.poly import Polynomial, domain_new, interpolate
from ..errors import ConfigurationError, FormatError, ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from ..transcript import Transcript, rho

BLIND_DEGREE = 3
COSET_SHIFT = 7  # a non-residue of every 2-power subgroup


class Env:
    """Values visible to a constraint at one evaluation point."""

    __slots__ = ("cur", "nxt", "pub", "ch", "x")

    def __init__(self, cur, nxt, pub, ch, x):
        self.cur, self.nxt, self.pub, self.ch, self.x = cur, nxt, pub, ch, x

    def w(self, name: str) -> int:
        return self.cur[name]

    def s(self, name: str) -> int:
        return self.nxt[name]

    def p(self, name: str) -> int:
        return self.pub[name]

    def c(self, name: str) -> int:
        return self.ch[name]


@dataclass(frozen=True)
class Constraint:
    label: str
    fn: Callable[[Env], int]
    degree: int  # number of (witness or public) polynomial factors in the worst product


@dataclass(frozen=True)
class Witness:
    name: str
    round: int = 0
    link: Optional[int] = None  # domain size of the edge commitment it is tied to


@dataclass(frozen=True)
class IopCircuit:
    label: str
    n: int
    witnesses: tuple[Witness, ...]
    constraints: tuple[Constraint, ...]
    public: Mapping[str, tuple[int, ...]] = field(default_factory=dict, compare=False, hash=False)
    # challenge names drawn after each witness round
    round_challenges: tuple[tuple[str, ...], ...] = ()
    params: tuple = ()

    @property
    def rounds(self) -> int:
        return 1 + max((w.round for w in self.witnesses), default=0)

    def linked(self) -> list[Witness]:
        return [w for w in self.witnesses if w.link is not None]

    def validate(self, srs: Srs) -> None:
        n = self.n
        if n < 1 or n & (n - 1):
            raise ShapeError(f"IOP domain size {n} is not a power of two")
        for name, col in self.public.items():
            if len(col) != n:
                raise ShapeError(f"public column {name} has length {len(col)} != {n}")
        for w in self.linked():
            if w.link < 1 or n % w.link:
                raise ShapeError(f"linked witness {w.name}: edge domain {w.link} does not divide {n}")
        if quotient_degree(self) > srs.max_degree or n + BLIND_DEGREE > srs.max_degree:
            raise ConfigurationError(f"IOP {self.label} needs SRS degree {quotient_degree(self)}")


def quotient_degree(c: IopCircuit) -> int:
    dmax = max((k.degree for k in c.constraints), default=1)
    return max(dmax * (c.n + BLIND_DEGREE) - c.n, 0)


@dataclass(frozen=True)
class IopProof:
    F: tuple[G1, ...]
    Bl: tuple[G1, ...]
    Q: tuple[G1, ...]
    at_zeta: tuple[int, ...]
    at_wzeta: tuple[int, ...]
    q_at_zeta: tuple[int, ...]
    h1: G1
    h2: G1

    def replace(self, **kw) -> "IopProof":
        from dataclasses import replace

        return replace(self, **kw)


def interleave_poly(m: int, n: int) -> Polynomial:
    """S with S(w) = 1 on H_m and 0 on H_n minus H_m: (m/n) * sum_t X^(t m)."""
    k = n // m
    c = m * inv(n) % P
    coeffs = [0] * ((k - 1) * m + 1)
    for t in range(k):
        coeffs[t * m] = c
    return Polynomial(coeffs)


def interleave_g2(srs: Srs, m: int, n: int) -> G2:
    if m == n:
        return srs.g2
    return srs.cached(("interleave", m, n), lambda: srs.commit_coeffs_g2(interleave_poly(m, n).coeffs))


def interleave_values(values: Sequence[int], n: int) -> list[int]:
    m = len(values)
    k = n // m
    out = [0] * n
    for j, v in enumerate(values):
        out[j * k] = v % P
    return out


class _Blinds:
    """Deterministic blinding coefficients derived from a prover seed."""

    def __init__(self, seed: bytes, label: str):
        self.seed, self.label, self.k = seed, label, 0

    def poly(self, name: str) -> Polynomial:
        cs = []
        for _ in range(BLIND_DEGREE + 1):
            cs.append(rho("IOP-blind", self.seed, self.label, name, self.k))
            self.k += 1
        return Polynomial(cs)


def _transcript(c: IopCircuit, links: Sequence[G1]) -> Transcript:
    t = Transcript("zkt/iop")
    t.absorb("circuit", c.label, c.n, list(c.params), [[w.name, w.round, w.link] for w in c.witnesses])
    t.absorb("edges", list(links))
    return t


def _squeeze_zeta(t: Transcript, n: int) -> int:
    while True:
        z = t.challenge("zeta")
        if pow(z, n, P) != 1:
            return z


def _lin_comb(points: Sequence[G1], scalars: Sequence[int]) -> G1:
    return msm(list(points), list(scalars)) if points else G1.zero()


WitnessBuilder = Callable[[int, Mapping[str, int]], Mapping[str, Sequence[int]]]


def iop_prove(c: IopCircuit, srs: Srs, values: Mapping[str, Sequence[int]], links: Mapping[str, G1] = None,
              seed: bytes = b"", later: Optional[WitnessBuilder] = None, check: bool = True) -> IopProof:
    """Prove c. ``values`` holds round-0 witness evaluations on H (linked ones at their edge domain).

    ``later(r, challenges)`` returns the evaluations of round r >= 1 once the
    challenges drawn so far are known.
    """
    c.validate(srs)
    n, dom = c.n, domain_new(c.n)
    links = dict(links or {})
    linked = c.linked()
    for w in linked:
        if w.name not in links:
            raise ShapeError(f"linked witness {w.name} has no edge commitment")
    t = _transcript(c, [links[w.name] for w in linked])
    blinds = _Blinds(seed, c.label)
    zh = Polynomial([P - 1] + [0] * (n - 1) + [1])
    evals: dict[str, list[int]] = {}
    polys: dict[str, Polynomial] = {}
    F: dict[str, G1] = {}
    Bl: dict[str, G1] = {}
    ch: dict[str, int] = {}
    vals = dict(values)
    for r in range(c.rounds):
        if r > 0:
            if later is None:
                raise ShapeError(f"circuit {c.label} has round {r} witnesses but no builder")
            vals.update(later(r, dict(ch)))
        round_ws = [w for w in c.witnesses if w.round == r]
        for w in round_ws:
            v = [x % P for x in vals[w.name]]
            if w.link is not None:
                if len(v) != w.link:
                    raise ShapeError(f"{w.name}: expected {w.link} edge values, got {len(v)}")
                v = interleave_values(v, n)
            elif len(v) != n:
                raise ShapeError(f"{w.name}: expected {n} values, got {len(v)}")
            evals[w.name] = v
            b = blinds.poly(w.name)
            polys[w.name] = interpolate(v, dom) + b * zh
            F[w.name] = srs.commit_coeffs(polys[w.name].coeffs)
            if w.link is not None:
                Bl[w.name] = srs.commit_coeffs(b.coeffs)
        t.absorb(f"round{r}", [F[w.name] for w in round_ws], [Bl[w.name] for w in round_ws if w.link is not None])
        for name in (c.round_challenges[r] if r < len(c.round_challenges) else ()):
            ch[name] = t.challenge(name)

    if check:
        _check_on_h(c, evals, ch)

    # quotients on a coset large enough for the worst constraint
    dmax = max((k.degree for k in c.constraints), default=1)
    M = next_pow2(dmax * (n + BLIND_DEGREE) + 1)
    big = domain_new(M)
    step = M // n
    shift = COSET_SHIFT
    wev = {name: big.coset_fft(list(p.coeffs), shift) for name, p in polys.items()}
    pub_ev = {name: big.coset_fft(interpolate(list(col), dom).coeffs, shift) for name, col in c.public.items()}
    xs = [shift * e % P for e in big.elements]
    zinv = [inv((pow(x, n, P) - 1) % P) for x in xs]
    Q_polys = []
    for k in c.constraints:
        qv = []
        for j in range(M):
            cur = {name: ev[j] for name, ev in wev.items()}
            nxt = {name: ev[(j + step) % M] for name, ev in wev.items()}
            pub = {name: ev[j] for name, ev in pub_ev.items()}
            qv.append(k.fn(Env(cur, nxt, pub, ch, xs[j])) % P * zinv[j] % P)
        Q_polys.append(Polynomial(big.coset_ifft(qv, shift)))
    Q = [srs.commit_coeffs(q.coeffs) for q in Q_polys]
    t.absorb("quotients", Q)

    zeta = _squeeze_zeta(t, n)
    wz = dom.omega * zeta % P
    names = [w.name for w in c.witnesses]
    at_z = tuple(polys[nm](zeta) for nm in names)
    at_wz = tuple(polys[nm](wz) for nm in names)
    q_z = tuple(q(zeta) for q in Q_polys)
    t.absorb("evals", list(at_z), list(at_wz), list(q_z))
    gamma = t.challenge("gamma")

    batch1 = Q_polys + [polys[nm] for nm in names]
    vals1 = list(q_z) + list(at_z)
    h1 = _batch_quotient(batch1, vals1, zeta, gamma)
    h2 = _batch_quotient([polys[nm] for nm in names], list(at_wz), wz, gamma)
    return IopProof(tuple(F[nm] for nm in names), tuple(Bl[w.name] for w in linked), tuple(Q),
                    at_z, at_wz, q_z, srs.commit_coeffs(h1.coeffs), srs.commit_coeffs(h2.coeffs))


def _batch_quotient(ps: Sequence[Polynomial], vs: Sequence[int], x: int, gamma: int) -> Polynomial:
    acc = Polynomial()
    g = 1
    for p, v in zip(ps, vs):
        acc = acc + (p - Polynomial.constant(v)).scale(g)
        g = g * gamma % P
    q, rem = acc.divmod_linear(x)
    return q


def _check_on_h(c: IopCircuit, evals: Mapping[str, list[int]], ch: Mapping[str, int]) -> None:
    n = c.n
    dom = domain_new(n)
    elems = dom.elements
    for k in c.constraints:
        for j in range(n):
            cur = {name: ev[j] for name, ev in evals.items()}
            nxt = {name: ev[(j + 1) % n] for name, ev in evals.items()}
            pub = {name: col[j] % P for name, col in c.public.items()}
            if k.fn(Env(cur, nxt, pub, ch, elems[j])) % P:
                raise WitnessInvalidError(f"{c.label}: constraint {k.label} fails at row {j}")


@dataclass
class IopVerdict:
    ok: bool
    stage: str = ""  # "", "format", "link", "step4", "open-zeta", "open-omega-zeta"

    def __bool__(self) -> bool:
        return self.ok


def _fail(stage: str) -> IopVerdict:
    return IopVerdict(False, stage)


def iop_verify(c: IopCircuit, srs: Srs, links: Mapping[str, G1], proof: IopProof) -> IopVerdict:
    n, dom = c.n, domain_new(c.n)
    names = [w.name for w in c.witnesses]
    linked = c.linked()
    if not isinstance(proof, IopProof):
        raise FormatError("not an IopProof")
    if (len(proof.F) != len(names) or len(proof.Bl) != len(linked) or len(proof.Q) != len(c.constraints)
            or len(proof.at_zeta) != len(names) or len(proof.at_wzeta) != len(names)
            or len(proof.q_at_zeta) != len(c.constraints)):
        raise FormatError(f"IOP proof for {c.label} has the wrong shape")
    if not all(isinstance(p, G1) for p in proof.F + proof.Bl + proof.Q + (proof.h1, proof.h2)):
        raise FormatError("IOP proof has points in the wrong group")
    if not all(isinstance(v, int) and 0 <= v < P for v in proof.at_zeta + proof.at_wzeta + proof.q_at_zeta):
        raise FormatError("IOP proof has non-canonical field elements")
    try:
        edge = [links[w.name] for w in linked]
    except KeyError as exc:
        raise FormatError(f"missing edge commitment {exc}") from None
    Fm = dict(zip(names, proof.F))

    # linkage of blinded witnesses to edge commitments
    zh2 = srs.g2_vanishing(n)
    for w, C, B in zip(linked, edge, proof.Bl):
        s2 = interleave_g2(srs, w.link, n)
        if not multi_pairing([(Fm[w.name], srs.g2), (-C, s2), (-B, zh2)]).is_zero():
            return _fail("link")

    t = _transcript(c, edge)
    ch: dict[str, int] = {}
    for r in range(c.rounds):
        round_ws = [w for w in c.witnesses if w.round == r]
        bl = dict(zip([w.name for w in linked], proof.Bl))
        t.absorb(f"round{r}", [Fm[w.name] for w in round_ws], [bl[w.name] for w in round_ws if w.link is not None])
        for name in (c.round_challenges[r] if r < len(c.round_challenges) else ()):
            ch[name] = t.challenge(name)
    t.absorb("quotients", list(proof.Q))
    zeta = _squeeze_zeta(t, n)
    wz = dom.omega * zeta % P
    t.absorb("evals", list(proof.at_zeta), list(proof.at_wzeta), list(proof.q_at_zeta))
    gamma = t.challenge("gamma")

    # step 4: every constraint at zeta
    lz = dom.lagrange_evals(zeta) if c.public else []
    pub = {name: sum(a * b for a, b in zip(col, lz)) % P for name, col in c.public.items()}
    env = Env(dict(zip(names, proof.at_zeta)), dict(zip(names, proof.at_wzeta)), pub, ch, zeta)
    zh_z = (pow(zeta, n, P) - 1) % P
    for k, qz in zip(c.constraints, proof.q_at_zeta):
        if (k.fn(env) - qz * zh_z) % P:
            return _fail("step4")

    # step 6: the two batched openings
    g1 = srs.g1
    pts1 = list(proof.Q) + list(proof.F)
    vals1 = list(proof.q_at_zeta) + list(proof.at_zeta)
    if not _opening_ok(srs, proof.h1, pts1, vals1, zeta, gamma, g1):
        return _fail("open-zeta")
    if not _opening_ok(srs, proof.h2, list(proof.F), list(proof.at_wzeta), wz, gamma, g1):
        return _fail("open-omega-zeta")
    return IopVerdict(True)


def _opening_ok(srs: Srs, h: G1, pts: Sequence[G1], vals: Sequence[int], x: int, gamma: int, g1: G1) -> bool:
    # e(h, [tau]_2) = e(sum g^i (P_i - v_i) + x h, [1]_2)
    gs = [1]
    for _ in range(len(pts) - 1):
        gs.append(gs[-1] * gamma % P)
    v = sum(g * y for g, y in zip(gs, vals)) % P
    rhs = _lin_comb(list(pts) + [g1, h], gs + [(-v) % P, x])
    return multi_pairing([(h, srs.g2_powers[1]), (-rhs, srs.g2)]).is_zero()
