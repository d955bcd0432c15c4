"""Basic blocks: one small pairing-checked NARK per tensor operation."""

from .base import (FOLDABLE, BlockKind, BlockProof, derive_challenges, make_static, relax, spec_for,
                   static_get, testset_for, verify_block)
from .common import Row, commit_values
from .aurora import SharedRandomness, matmul_derived, permute_derived, prove_matmul, prove_permute, prove_sum
from .cqlin import FixedMatrix, cqlin_static, preprocess_matrix, prove_cqlin
from .linear import prove_add, prove_concat, prove_eq, prove_sub
from .lookup import LookupTable, cq_static, preprocess_table, prove_cq, prove_cq2, public_cq_static
from .mul import prove_mul, prove_mulconst, prove_mulscalar

__all__ = [
    "FOLDABLE", "BlockKind", "BlockProof", "derive_challenges", "make_static", "relax", "spec_for", "static_get",
    "testset_for", "verify_block", "Row", "commit_values", "SharedRandomness", "matmul_derived",
    "permute_derived", "prove_matmul", "prove_permute", "prove_sum", "FixedMatrix", "cqlin_static",
    "preprocess_matrix", "prove_cqlin", "prove_add", "prove_concat", "prove_eq", "prove_sub", "LookupTable",
    "cq_static", "preprocess_table", "prove_cq", "prove_cq2", "public_cq_static", "prove_mul",
    "prove_mulconst", "prove_mulscalar",
]
