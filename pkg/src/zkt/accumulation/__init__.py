"""Folding of foldable block proofs into constant-size accumulators."""

from .accumulator import (AccInstance, Accumulator, AccWitness, cross_identity_holds, cross_terms, decide, fold,
                          fold_challenge, fold_verify, relax_proof)
from .tree import SCHEDULES, FoldNode, FoldTree, expected_depth, fold_accumulators, fold_tree

__all__ = [
    "AccInstance", "Accumulator", "AccWitness", "cross_identity_holds", "cross_terms", "decide", "fold",
    "fold_challenge", "fold_verify", "relax_proof", "SCHEDULES", "FoldNode", "FoldTree", "expected_depth",
    "fold_accumulators", "fold_tree",
]
