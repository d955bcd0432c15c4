"""Verification entry point for the non-foldable (standalone) block kinds."""

from __future__ import annotations

from ..blocks.base import BlockKind, BlockProof
from ..errors import FormatError
from ..pcs.kzg import Srs
from .divmod import verify_div_mod
from .protocols import VERIFIERS, Verdict


def verify_standalone_report(proof: BlockProof, srs: Srs) -> Verdict:
    if proof.kind in (BlockKind.Div, BlockKind.Mod):
        return verify_div_mod(proof, srs)
    fn = VERIFIERS.get(proof.kind)
    if fn is None:
        raise FormatError(f"no standalone verifier for {proof.kind.value}")
    try:
        return fn(proof, srs)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise FormatError(f"malformed {proof.kind.value} proof: {exc}") from None


def verify_standalone(proof: BlockProof, srs: Srs) -> bool:
    return verify_standalone_report(proof, srs).ok
