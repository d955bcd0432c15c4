"""Block kinds, block proofs, and the registry tying each kind to its tests."""

from __future__ import annotations

import contextlib
import enum
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Mapping, Sequence

from ..algebra.curve import G1, G2
from ..errors import FormatError, UnsupportedFoldError
from ..pcs.kzg import Srs
from ..transcript import rho_nark
from .relaxed import RelaxedTestSet, evaluate


class BlockKind(str, enum.Enum):
    Add = "Add"
    Sub = "Sub"
    Eq = "Eq"
    Concat = "Concat"
    Mul = "Mul"
    MulConst = "MulConst"
    MulScalar = "MulScalar"
    Sum = "Sum"
    MatMul = "MatMul"
    Permute = "Permute"
    CQ = "CQ"
    CQ2 = "CQ2"
    CQLin = "CQLin"
    Div = "Div"
    Mod = "Mod"
    BooleanCheck = "BooleanCheck"
    MaxProof = "MaxProof"
    CopyConstraint = "CopyConstraint"
    OneToOne = "OneToOne"
    Ordered = "Ordered"

    @property
    def foldable(self) -> bool:
        return self in FOLDABLE


FOLDABLE = frozenset({
    BlockKind.Add, BlockKind.Sub, BlockKind.Eq, BlockKind.Concat, BlockKind.Mul,
    BlockKind.MulConst, BlockKind.MulScalar, BlockKind.Sum, BlockKind.MatMul,
    BlockKind.Permute, BlockKind.CQ, BlockKind.CQ2, BlockKind.CQLin,
})

Static = tuple  # sorted tuple of (name, value) pairs


def make_static(**kw) -> Static:
    return tuple(sorted(kw.items()))


def static_get(static: Static, name: str, default=None):
    for k, v in static:
        if k == name:
            return v
    return default


@dataclass(frozen=True)
class KindSpec:
    kind: BlockKind
    g1_slots: Callable[[Static], Sequence[str]]
    g2_slots: Callable[[Static], Sequence[str]]
    # (challenge name, slot names absorbed before it is squeezed)
    rounds: Callable[[Static], Sequence[tuple[str, Sequence[str]]]]
    tests: Callable[[Static, Srs], RelaxedTestSet]


REGISTRY: dict[BlockKind, KindSpec] = {}


def register(spec: KindSpec) -> KindSpec:
    REGISTRY[spec.kind] = spec
    return spec


def spec_for(kind: BlockKind) -> KindSpec:
    _ensure_loaded()
    try:
        return REGISTRY[kind]
    except KeyError:
        raise UnsupportedFoldError(f"{kind.value} has no relaxed pairing tests (not foldable)") from None


def _ensure_loaded() -> None:
    if not REGISTRY:
        from . import aurora, cqlin, linear, lookup, mul  # noqa: F401


@dataclass(frozen=True)
class BlockProof:
    """A block NARK: public inputs, commitments, challenges (and a payload for IOP kinds)."""

    kind: BlockKind
    static: Static
    pi: tuple[int, ...]
    g1: tuple[G1, ...]
    g2: tuple[G2, ...]
    challenges: tuple[int, ...]
    payload: Any = None

    def slots(self) -> dict:
        spec = spec_for(self.kind)
        out = dict(zip(spec.g1_slots(self.static), self.g1))
        out.update(zip(spec.g2_slots(self.static), self.g2))
        return out

    def slot(self, name: str):
        return self.slots()[name]

    @property
    def witness_w(self) -> tuple:
        # identity commitment: the witness is the commitment list itself
        return self.g1 + self.g2

    def replace(self, **kw) -> "BlockProof":
        from dataclasses import replace

        return replace(self, **kw)


def derive_challenges(kind: BlockKind, static: Static, pi: Sequence[int], slots: Mapping) -> list[int]:
    spec = spec_for(kind)
    r = rho_nark(kind.value, static, list(pi))
    out = []
    for _name, absorbed in spec.rounds(static):
        r = rho_nark(r, [slots[s] for s in absorbed])
        out.append(r)
    return out


def challenge_names(kind: BlockKind, static: Static) -> list[str]:
    return [name for name, _ in spec_for(kind).rounds(static)]


def instance_values(kind: BlockKind, static: Static, pi: Sequence[int], g1: Sequence[G1],
                    g2: Sequence[G2], challenges: Sequence[int]) -> dict:
    spec = spec_for(kind)
    g1n, g2n = spec.g1_slots(static), spec.g2_slots(static)
    cn = challenge_names(kind, static)
    if len(g1) != len(g1n) or len(g2) != len(g2n) or len(challenges) != len(cn):
        raise FormatError(f"{kind.value} proof layout mismatch")
    vals: dict = {f"pi{i}": v for i, v in enumerate(pi)}
    vals.update(zip(g1n, g1))
    vals.update(zip(g2n, g2))
    vals.update(zip(cn, challenges))
    return vals


_TESTSET_CACHE: dict = {}


def testset_for(kind: BlockKind, static: Static, srs: Srs) -> RelaxedTestSet:
    key = (kind, static, id(srs))
    ts = _TESTSET_CACHE.get(key)
    if ts is None:
        ts = spec_for(kind).tests(static, srs)
        if len(_TESTSET_CACHE) > 4096:
            _TESTSET_CACHE.clear()
        _TESTSET_CACHE[key] = ts
    return ts


def check_structure(proof: BlockProof) -> None:
    if not isinstance(proof, BlockProof):
        raise FormatError("not a BlockProof")
    if not isinstance(proof.kind, BlockKind):
        raise FormatError(f"unknown block kind tag {proof.kind!r}")
    if not proof.kind.foldable:
        return
    spec = spec_for(proof.kind)
    try:
        g1n, g2n = spec.g1_slots(proof.static), spec.g2_slots(proof.static)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad static parameters for {proof.kind.value}: {exc}") from None
    if len(proof.g1) != len(g1n) or len(proof.g2) != len(g2n):
        raise FormatError(f"{proof.kind.value} proof has wrong slot count")
    if len(proof.challenges) != len(spec.rounds(proof.static)):
        raise FormatError(f"{proof.kind.value} proof has wrong challenge count")
    if not all(isinstance(p, G1) for p in proof.g1) or not all(isinstance(p, G2) for p in proof.g2):
        raise FormatError(f"{proof.kind.value} proof has slots in the wrong group")


def verify_block(proof: BlockProof, srs: Srs) -> bool:
    """Accept iff every pairing test holds with mu = 1, e = 0 (format errors raise)."""
    check_structure(proof)
    if not proof.kind.foldable:
        from ..iop.dispatch import verify_standalone

        return verify_standalone(proof, srs)
    vals = instance_values(proof.kind, proof.static, proof.pi, proof.g1, proof.g2, proof.challenges)
    if list(proof.challenges) != derive_challenges(proof.kind, proof.static, proof.pi, vals):
        return False
    ts = testset_for(proof.kind, proof.static, srs)
    return all(v.is_zero() for v in evaluate(ts, vals, 1))


def relax(proof: BlockProof, srs: Srs):
    """Lift a proof to an accumulator with b = 1, mu = 1, e = 0."""
    from ..accumulation.accumulator import relax_proof

    return relax_proof(proof, srs)


# test-only bypass for prover-side witness checks
_SKIP_CHECKS = [False]


@contextlib.contextmanager
def allow_invalid_witness() -> Iterator[None]:
    _SKIP_CHECKS.append(True)
    try:
        yield
    finally:
        _SKIP_CHECKS.pop()


def checks_enabled() -> bool:
    return not _SKIP_CHECKS[-1]
