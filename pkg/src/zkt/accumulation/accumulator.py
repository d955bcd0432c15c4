"""Accumulators for the foldable block kinds: fold, fold verification, decider.

An accumulator is a block instance in relaxed form. It carries the public
inputs, the G1/G2 commitments and the challenges of a block proof. It also
carries a slack ``mu``, an error vector ``E`` in GT (one entry per pairing
test) and a flag ``b`` that is 1 exactly for an unfolded proof. Commitments
are the identity, so the witness is the instance itself: ``m = C`` and
``e = E``.

Folding ``acc`` into ``acc'`` with challenge gamma yields ``gamma*v + v'``.
The new error is ``E' + sum_j gamma^j E_j + gamma^d E``, where the ``E_j``
are the cross terms of the degree-d expansion.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ..algebra.curve import G1, G2, GT
from ..algebra.field import MODULUS as P
from ..blocks.base import (BlockKind, BlockProof, Static, check_structure, derive_challenges, instance_values,
                           spec_for, testset_for)
from ..blocks.relaxed import RelaxedTestSet, combine_values, cross_terms as _cross_terms, evaluate
from ..errors import FoldError, FormatError, UnsupportedFoldError
from ..pcs.kzg import Srs
from ..transcript import encode, rho_acc


@dataclass(frozen=True)
class AccInstance:
    """acc.x: everything the fold verifier sees."""

    kind: BlockKind
    static: Static
    pi: tuple[int, ...]
    g1: tuple[G1, ...]
    g2: tuple[G2, ...]
    challenges: tuple[int, ...]
    E: tuple[GT, ...]
    mu: int
    b: int

    def values(self) -> dict:
        return instance_values(self.kind, self.static, self.pi, self.g1, self.g2, self.challenges)

    def transcript_items(self) -> list:
        return [self.kind.value, self.static, list(self.pi), list(self.g1), list(self.g2),
                list(self.challenges), list(self.E), self.mu, self.b]

    def to_proof(self) -> BlockProof:
        return BlockProof(self.kind, self.static, self.pi, self.g1, self.g2, self.challenges)

    @property
    def group_element_count(self) -> int:
        return len(self.g1) + len(self.g2) + len(self.E)


@dataclass(frozen=True)
class AccWitness:
    """acc.w: committed messages and error vector."""

    m: tuple
    e: tuple[GT, ...]


@dataclass(frozen=True)
class Accumulator:
    x: AccInstance
    w: AccWitness

    @property
    def kind(self) -> BlockKind:
        return self.x.kind

    @property
    def b(self) -> int:
        return self.x.b

    @property
    def mu(self) -> int:
        return self.x.mu

    @classmethod
    def from_instance(cls, x: AccInstance) -> "Accumulator":
        # identity commitment: the witness is read straight off the instance
        return cls(x, AccWitness(x.g1 + x.g2, x.E))

    @classmethod
    def from_proof(cls, proof: BlockProof, n_tests: int) -> "Accumulator":
        if not proof.kind.foldable:
            raise UnsupportedFoldError(f"{proof.kind.value} is not foldable")
        x = AccInstance(proof.kind, proof.static, tuple(proof.pi), tuple(proof.g1), tuple(proof.g2),
                        tuple(proof.challenges), (GT.zero(),) * n_tests, 1, 1)
        return cls.from_instance(x)

    @classmethod
    def zero(cls, kind: BlockKind, static: Static, srs: Srs, n_pi: int = 0) -> "Accumulator":
        """All-zero accumulator with mu = 0; it satisfies every homogeneous test."""
        spec = spec_for(kind)
        ts = testset_for(kind, static, srs)
        x = AccInstance(kind, static, (0,) * n_pi, tuple(G1.zero() for _ in spec.g1_slots(static)),
                        tuple(G2.zero() for _ in spec.g2_slots(static)),
                        tuple(0 for _ in spec.rounds(static)), (GT.zero(),) * len(ts), 0, 0)
        return cls.from_instance(x)


def relax_proof(proof: BlockProof, srs: Srs) -> tuple[RelaxedTestSet, Accumulator]:
    check_structure(proof)
    if not proof.kind.foldable:
        raise UnsupportedFoldError(f"{proof.kind.value} is not foldable")
    ts = testset_for(proof.kind, proof.static, srs)
    return ts, Accumulator.from_proof(proof, len(ts))


def _values(acc_x: AccInstance) -> dict:
    return acc_x.values()


def cross_terms(ts: RelaxedTestSet, acc: Accumulator, acc2: Accumulator) -> list[list[GT]]:
    """Cross-term error vectors e_1..e_{d-1} for folding acc (scaled by X) with acc2."""
    return _cross_terms(ts, _values(acc.x), acc.x.mu, acc.w.e, _values(acc2.x), acc2.x.mu, acc2.w.e)


def fold_challenge(x1: AccInstance, x2: AccInstance, pf: Sequence[Sequence[GT]]) -> int:
    return rho_acc(x1.transcript_items(), x2.transcript_items(), [list(v) for v in pf])


def _rlc_tuple(a: Sequence, b: Sequence, g: int) -> tuple:
    out = []
    for va, vb in zip(a, b):
        out.append((g * va + vb) % P if isinstance(va, int) else va * g + vb)
    return tuple(out)


def _combine_error(E: Sequence[GT], E2: Sequence[GT], pf: Sequence[Sequence[GT]], g: int, d: int) -> tuple[GT, ...]:
    out = []
    for i in range(len(E2)):
        acc = E2[i]
        gj = 1
        for ej in pf:
            gj = gj * g % P
            acc = acc + ej[i] * gj
        acc = acc + E[i] * pow(g, d, P)
        out.append(acc)
    return tuple(out)


def _same_group(x1: AccInstance, x2: AccInstance) -> None:
    if x1.kind != x2.kind:
        raise FoldError(f"cannot fold {x1.kind.value} with {x2.kind.value}")
    if not x1.kind.foldable:
        raise UnsupportedFoldError(f"{x1.kind.value} is not foldable")
    if x1.static != x2.static:
        raise FoldError(f"{x1.kind.value} instances have different static parameters")
    if len(x1.pi) != len(x2.pi) or len(x1.E) != len(x2.E):
        raise FoldError("instances have different shapes")


def _fresh_challenges(x: AccInstance) -> AccInstance:
    """Step 1 for b = 1 inputs: re-derive the NARK challenges from pi and commitments."""
    if x.b != 1:
        return x
    ch = derive_challenges(x.kind, x.static, x.pi, x.values())
    return replace(x, challenges=tuple(ch))


def fold(acc: Accumulator, acc2: Accumulator, srs: Srs) -> tuple[Accumulator, list[list[GT]]]:
    """Fold two accumulators of the same kind; returns (acc'', pf)."""
    _same_group(acc.x, acc2.x)
    x1, x2 = _fresh_challenges(acc.x), _fresh_challenges(acc2.x)
    a1 = acc if x1 is acc.x else Accumulator(x1, acc.w)
    a2 = acc2 if x2 is acc2.x else Accumulator(x2, acc2.w)
    ts = testset_for(x1.kind, x1.static, srs)
    pf = cross_terms(ts, a1, a2)
    g = fold_challenge(x1, x2, pf)
    x = AccInstance(
        x1.kind, x1.static,
        _rlc_tuple(x1.pi, x2.pi, g),
        _rlc_tuple(x1.g1, x2.g1, g),
        _rlc_tuple(x1.g2, x2.g2, g),
        _rlc_tuple(x1.challenges, x2.challenges, g),
        _combine_error(x1.E, x2.E, pf, g, ts.degree),
        (g * x1.mu + x2.mu) % P,
        0,
    )
    w = AccWitness(_rlc_tuple(a1.w.m, a2.w.m, g), _combine_error(a1.w.e, a2.w.e, pf, g, ts.degree))
    return Accumulator(x, w), pf


def _check_leaf(x: AccInstance) -> bool:
    if x.b != 1:
        return True
    if x.mu != 1 or any(not v.is_zero() for v in x.E):
        return False
    return list(x.challenges) == derive_challenges(x.kind, x.static, x.pi, x.values())


def fold_verify(x1: AccInstance, x2: AccInstance, pf: Sequence[Sequence[GT]], result: AccInstance,
                srs: Optional[Srs] = None, degree: Optional[int] = None) -> bool:
    """Replay one fold from public data only."""
    try:
        _same_group(x1, x2)
        _same_group(x1, result)
    except FoldError:
        return False
    if result.b != 0:
        return False
    if degree is None:
        if srs is None:
            raise FoldError("fold_verify needs the SRS or the test degree")
        degree = testset_for(x1.kind, x1.static, srs).degree
    if len(pf) != max(degree - 1, 0) or any(len(v) != len(x1.E) for v in pf):
        return False
    for x in (x1, x2):
        try:
            if not _check_leaf(x):
                return False
        except FormatError:
            return False
    g = fold_challenge(x1, x2, pf)
    return (
        result.mu == (g * x1.mu + x2.mu) % P
        and result.pi == _rlc_tuple(x1.pi, x2.pi, g)
        and result.challenges == _rlc_tuple(x1.challenges, x2.challenges, g)
        and result.g1 == _rlc_tuple(x1.g1, x2.g1, g)
        and result.g2 == _rlc_tuple(x1.g2, x2.g2, g)
        and result.E == _combine_error(x1.E, x2.E, pf, g, degree)
    )


def decide(acc: Accumulator, srs: Srs) -> bool:
    """Evaluate every relaxed test at (m, r, mu) and compare with e."""
    x, w = acc.x, acc.w
    if not x.kind.foldable:
        return False
    if tuple(w.m) != x.g1 + x.g2 or tuple(w.e) != tuple(x.E):
        return False
    if x.b == 1 and not _check_leaf(x):
        return False
    try:
        vals = x.values()
    except FormatError:
        return False
    ts = testset_for(x.kind, x.static, srs)
    if len(x.E) != len(ts):
        return False
    got = evaluate(ts, vals, x.mu)
    return all(a == b for a, b in zip(got, x.E))


def cross_identity_holds(ts: RelaxedTestSet, acc: Accumulator, acc2: Accumulator,
                         pf: Sequence[Sequence[GT]], points: Sequence[int]) -> bool:
    """Check T(X v + v') = e' + sum_j e_j X^j + e X^d at each point X."""
    v, v2 = _values(acc.x), _values(acc2.x)
    d = ts.degree
    for X in points:
        lhs = evaluate(ts, combine_values(v, v2, X), (X * acc.x.mu + acc2.x.mu) % P)
        for i, val in enumerate(lhs):
            rhs = acc2.w.e[i]
            for j, ej in enumerate(pf, start=1):
                rhs = rhs + ej[i] * pow(X, j, P)
            rhs = rhs + acc.w.e[i] * pow(X, d, P)
            if val != rhs:
                return False
    return True


def instance_digest(x: AccInstance) -> bytes:
    return hashlib.sha3_256(encode(x.transcript_items())).digest()
