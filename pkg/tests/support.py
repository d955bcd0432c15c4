"""Honest instance generators and proof mutators shared by the test modules."""

from __future__ import annotations

import dataclasses
import random
from typing import Callable

from zkt.accumulation import AccInstance, decide, fold_challenge, relax_proof
from zkt.algebra.curve import G1, G2, GT, pairing
from zkt.algebra.field import MODULUS as P
from zkt.algebra.field import encode_signed
from zkt.blocks.aurora import SharedRandomness, prove_matmul, prove_permute, prove_sum
from zkt.blocks.base import BlockKind, BlockProof, derive_challenges, instance_values, verify_block
from zkt.blocks.common import commit_values
from zkt.blocks.cqlin import FixedMatrix, preprocess_matrix, prove_cqlin
from zkt.blocks.linear import prove_add, prove_concat, prove_eq, prove_sub
from zkt.blocks.lookup import LookupTable, preprocess_table, prove_cq, prove_cq2
from zkt.blocks.mul import prove_mul, prove_mulconst, prove_mulscalar
from zkt.errors import FormatError
from zkt.iop import (IopProof, PermutationMap, boolean_check, copy_constraint, div_mod_prove, divide_values,
                     max_proof, ordered_check)

FOLDABLE = [BlockKind.Add, BlockKind.Sub, BlockKind.Eq, BlockKind.Concat, BlockKind.Mul, BlockKind.MulConst,
            BlockKind.MulScalar, BlockKind.Sum, BlockKind.MatMul, BlockKind.Permute, BlockKind.CQ, BlockKind.CQ2,
            BlockKind.CQLin]
COMPOSITES = ["BooleanCheck", "Ordered", "MaxProof", "CopyConstraint", "DivMod"]
DOMAINS = (4, 8, 16, 32, 64)


class Gen:
    """Random honest proofs for every block kind over domains of size 4..64."""

    def __init__(self, srs, seed: int = 0):
        self.srs = srs
        self.rng = random.Random(seed)
        self.range_table = LookupTable.range(0, 64, "set64")
        self.relu_table = LookupTable.function(lambda x: max(x, 0), -32, 32, "relu32")
        preprocess_table(srs, self.range_table)
        preprocess_table(srs, self.relu_table)
        self._mats: dict[int, list[FixedMatrix]] = {}
        # set to pin the CQLin challenge, as the shared model randomness does for one fold group
        self.shared_alpha: int | None = None

    # primitives ---------------------------------------------------------------
    def n(self) -> int:
        return self.rng.choice(DOMAINS)

    def vec(self, n: int, lo: int = 0, hi: int = 100) -> list[int]:
        return [self.rng.randrange(lo, hi) for _ in range(n)]

    def row(self, vals):
        return commit_values(self.srs, [v % P for v in vals])

    def rand(self) -> SharedRandomness:
        return SharedRandomness(self.rng.randrange(P), self.rng.randrange(P))

    def matrix(self, n: int) -> FixedMatrix:
        pool = self._mats.setdefault(n, [])
        if len(pool) < 3:
            out = self.rng.choice([o for o in (2, 4, 8) if o <= n])
            W = FixedMatrix.from_ints([[self.rng.randrange(-5, 6) for _ in range(n)] for _ in range(out)],
                                      f"W{n}_{len(pool)}")
            preprocess_matrix(self.srs, W)
            pool.append(W)
            return W
        return self.rng.choice(pool)

    # foldable kinds -------------------------------------------------------------
    def Add(self, n=None):
        n = n or self.n()
        f, g = self.vec(n), self.vec(n)
        return prove_add(self.row(f), self.row(g), self.row([a + b for a, b in zip(f, g)]))

    def Sub(self, n=None):
        n = n or self.n()
        f, g = self.vec(n), self.vec(n)
        return prove_sub(self.row(f), self.row(g), self.row([a - b for a, b in zip(f, g)]))

    def Eq(self, n=None):
        n = n or self.n()
        f = self.vec(n)
        return prove_eq(self.row(f), self.row(list(f)))

    def Concat(self, n=None):
        n = n or self.n()
        counts = [self.rng.randrange(1, 3) for _ in range(self.rng.randrange(1, 3))]
        ins = [self.row(self.vec(n)) for _ in range(sum(counts))]
        outs = [self.row(list(r.values)) for r in ins]
        return prove_concat(ins, outs, counts)

    def Mul(self, n=None):
        n = n or self.n()
        f, h = self.vec(n), self.vec(n)
        return prove_mul(self.srs, self.row(f), self.row(h), self.row([a * b for a, b in zip(f, h)]))

    def MulConst(self, n=None):
        n = n or self.n()
        f, c = self.vec(n), self.rng.randrange(-8, 9)
        return prove_mulconst(self.row(f), self.row([c * a for a in f]), c)

    def MulScalar(self, n=None):
        n = n or self.n()
        f, s = self.vec(n), self.rng.randrange(P)
        return prove_mulscalar(self.srs, self.row(f), self.row([s * a for a in f]), s)

    def Sum(self, n=None):
        n = n or self.n()
        f = self.vec(n)
        return prove_sum(self.srs, self.row(f), self.row([sum(f)]))

    def MatMul(self, n=None):
        n = n or self.n()
        l, mb = self.rng.randrange(1, 4), self.rng.randrange(1, 4)
        m = 4 if mb > 2 else 2
        A = [self.vec(n, 0, 10) for _ in range(l)]
        B = [self.vec(n, 0, 10) for _ in range(mb)]
        C = [[sum(x * y for x, y in zip(a, b)) for b in B] + [0] * (m - mb) for a in A]
        return prove_matmul(self.srs, [self.row(r) for r in A], [self.row(r) for r in B],
                            [self.row(r) for r in C], self.rand())

    def Permute(self, n=None):
        # transpose of an r x n matrix: B[i][j] = A[j][i] = A_flat[i + j*n]
        n = n or self.n()
        r = self.rng.choice([2, 4])
        A = [self.vec(n) for _ in range(r)]
        B = [[A[j][i] for j in range(r)] for i in range(n)]
        return prove_permute(self.srs, [self.row(x) for x in A], [self.row(x) for x in B],
                             list(range(n)), [j * n for j in range(r)], self.rand())

    def CQ(self, n=None):
        n = n or self.n()
        return prove_cq(self.srs, self.row(self.vec(n, 0, 64)), self.range_table)

    def CQ2(self, n=None):
        n = n or self.n()
        xs = self.vec(n, -32, 32)
        return prove_cq2(self.srs, self.row(xs), self.row([max(x, 0) for x in xs]), self.relu_table)

    def CQLin(self, n=None):
        n = n or self.n()
        W = self.matrix(n)
        x = self.vec(n, -20, 20)
        alpha = self.shared_alpha if self.shared_alpha is not None else self.rng.randrange(P)
        return prove_cqlin(self.srs, self.row(x), self.row(W.apply([v % P for v in x])), W, alpha)

    # non-foldable composites ------------------------------------------------------
    def BooleanCheck(self, n=None):
        n = n or self.n()
        return boolean_check(self.srs, self.row(self.vec(n, 0, 2)), seed=self._seed())

    def Ordered(self, n=None):
        n = n or self.n()
        f = self.vec(n, -40, 40)
        direction = self.rng.choice(["descending", "ascending"])
        g = sorted(f, reverse=direction == "descending")
        return ordered_check(self.srs, self.row(f), self.row(g), direction, seed=self._seed())

    def MaxProof(self, n=None):
        n = n or self.n()
        f = self.vec(n, -50, 50)
        return max_proof(self.srs, self.row(f), self.row([max(f)]), seed=self._seed())

    def CopyConstraint(self, n=None):
        n = n or self.n()
        p1 = self.rng.randrange(1, 3)
        out_n = self.rng.choice([k for k in DOMAINS if k <= n] or [n])
        p2 = self.rng.randrange(1, 3)
        ins = [self.vec(n) for _ in range(p1)]
        flat = [v for r in ins for v in r]
        sigma, outs = [], []
        for _ in range(p2):
            row = []
            for _ in range(out_n):
                u = self.rng.random()
                if u < 0.7:
                    s = self.rng.randrange(p1 * n)
                    sigma.append(s)
                    row.append(flat[s])
                elif u < 0.9:
                    sigma.append(("pad", 0))
                    row.append(0)
                else:
                    sigma.append(None)
                    row.append(self.rng.randrange(100))
            outs.append(row)
        pm = PermutationMap.build(p1, n, p2, out_n, sigma)
        return copy_constraint(self.srs, [self.row(r) for r in ins], [self.row(r) for r in outs], pm, self._seed())

    def DivMod(self, n=None):
        n = n or self.n()
        a = self.row(self.vec(n, -500, 500))
        mode = self.rng.choice(["Div", "Mod"])
        if self.rng.random() < 0.5:
            b = self.rng.randrange(1, 40)
            q, r = divide_values(a.values, b)
        else:
            bv = self.vec(n, 1, 40)
            b = self.row(bv)
            q, r = divide_values(a.values, bv)
        return div_mod_prove(self.srs, a, b, self.row(q), self.row(r), 8, mode)

    def _seed(self) -> bytes:
        return self.rng.randbytes(8)

    def make(self, kind) -> BlockProof:
        name = kind.value if isinstance(kind, BlockKind) else kind
        return getattr(self, name)()


def signed(vals):
    return [encode_signed(v) for v in vals]


# mutation -----------------------------------------------------------------------

_IOP_POINTS = ("F", "Bl", "Q", "h1", "h2")
_IOP_VALUES = ("at_zeta", "at_wzeta", "q_at_zeta")


def mutation_sites(obj, path=(), scalars=False):
    """(path, category) for every commitment and evaluation inside a proof."""
    if isinstance(obj, (G1, G2)):
        yield path, "commitment"
    elif isinstance(obj, BlockProof):
        for fld in ("g1", "g2"):
            yield from mutation_sites(getattr(obj, fld), path + (fld,))
        yield from mutation_sites(obj.challenges, path + ("challenges",), True)
        if obj.payload is not None:
            yield from mutation_sites(obj.payload, path + ("payload",))
    elif isinstance(obj, IopProof):
        for fld in _IOP_POINTS:
            yield from mutation_sites(getattr(obj, fld), path + (fld,))
        for fld in _IOP_VALUES:
            yield from mutation_sites(getattr(obj, fld), path + (fld,), True)
    elif isinstance(obj, tuple):
        for i, v in enumerate(obj):
            yield from mutation_sites(v, path + (i,), scalars)
    elif isinstance(obj, dict):
        for k in sorted(obj):
            yield from mutation_sites(obj[k], path + (k,), scalars)
    elif scalars and isinstance(obj, int) and not isinstance(obj, bool):
        yield path, "evaluation"


def _get(obj, key):
    return obj[key] if isinstance(obj, (tuple, dict)) else getattr(obj, key)


def replace_at(obj, path, fn: Callable):
    if not path:
        return fn(obj)
    key, rest = path[0], path[1:]
    new = replace_at(_get(obj, key), rest, fn)
    if isinstance(obj, tuple):
        return obj[:key] + (new,) + obj[key + 1:]
    if isinstance(obj, dict):
        return {**obj, key: new}
    return dataclasses.replace(obj, **{key: new})


def bump(rng: random.Random):
    k = rng.randrange(1, P)

    def fn(v):
        if isinstance(v, G1):
            return v + G1.generator() * k
        if isinstance(v, G2):
            return v + G2.generator() * k
        if isinstance(v, GT):
            return v + pairing(G1.generator(), G2.generator()) * k
        return (v + k) % P

    return fn


def mutate(proof: BlockProof, rng: random.Random, rederive: bool = True):
    """One random single-site mutation; returns (mutant, path, category).

    With ``rederive`` a foldable proof gets challenges recomputed from the
    mutated commitments, so the forgery is transcript-consistent.
    """
    sites = list(mutation_sites(proof))
    path, cat = rng.choice(sites)
    out = replace_at(proof, path, bump(rng))
    if rederive and proof.kind.foldable and path[0] in ("g1", "g2"):
        vals = instance_values(out.kind, out.static, out.pi, out.g1, out.g2, out.challenges)
        out = dataclasses.replace(out, challenges=tuple(derive_challenges(out.kind, out.static, out.pi, vals)))
    return out, path, cat


def accepts(proof: BlockProof, srs) -> bool:
    """verify_block with format errors counted as rejection."""
    try:
        return verify_block(proof, srs)
    except FormatError:
        return False


def decide_relaxed(proof: BlockProof, srs) -> bool:
    try:
        _, acc = relax_proof(proof, srs)
    except FormatError:
        return False
    return decide(acc, srs)


def _rlc(a, b, g):
    return tuple((g * x + y) % P if isinstance(x, int) else x * g + y for x, y in zip(a, b))


def refold(x1: AccInstance, x2: AccInstance, pf, degree: int) -> AccInstance:
    """The fold result a verifier would accept for the given (possibly forged) pf."""
    g = fold_challenge(x1, x2, pf)
    E = []
    for i in range(len(x1.E)):
        acc = x2.E[i]
        for j, ej in enumerate(pf, start=1):
            acc = acc + ej[i] * pow(g, j, P)
        E.append(acc + x1.E[i] * pow(g, degree, P))
    return AccInstance(x1.kind, x1.static, _rlc(x1.pi, x2.pi, g), _rlc(x1.g1, x2.g1, g), _rlc(x1.g2, x2.g2, g),
                       _rlc(x1.challenges, x2.challenges, g), tuple(E), (g * x1.mu + x2.mu) % P, 0)
