"""Field, polynomial, and pairing-group arithmetic."""

from .curve import G1, G2, GT, msm, multi_pairing, pairing
from .field import MODULUS, batch_inv, decode_signed, encode_signed, inv, root_of_unity
from .poly import (
    EvaluationDomain,
    Polynomial,
    domain_new,
    interpolate,
    quotient_by_vanishing,
    quotient_linear,
)

__all__ = [
    "G1", "G2", "GT", "msm", "multi_pairing", "pairing",
    "MODULUS", "batch_inv", "decode_signed", "encode_signed", "inv", "root_of_unity",
    "EvaluationDomain", "Polynomial", "domain_new", "interpolate",
    "quotient_by_vanishing", "quotient_linear",
]
