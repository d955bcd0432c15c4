"""Polynomial IOP and the standalone protocols built on it."""

from .core import Constraint, Env, IopCircuit, IopProof, IopVerdict, Witness, iop_prove, iop_verify
from .divmod import div_mod_prove, divide_values, verify_div_mod
from .dispatch import verify_standalone, verify_standalone_report
from .protocols import (PermutationMap, Verdict, boolean_check, copy_constraint, max_proof, one_to_one,
                        ordered_check)

__all__ = [
    "Constraint", "Env", "IopCircuit", "IopProof", "IopVerdict", "Witness", "iop_prove", "iop_verify",
    "div_mod_prove", "divide_values", "verify_div_mod", "verify_standalone", "verify_standalone_report",
    "PermutationMap", "Verdict", "boolean_check", "copy_constraint", "max_proof", "one_to_one", "ordered_check",
]
