"""Witness generation, model proving, proof bundles and verification."""

from .bundle import MAGIC, FoldGroup, ProofBundle, PublicIO, deserialize_bundle, serialize_bundle
from .plan import Item, plan_items
from .prove import preprocess_model, prove_model
from .verify import Component, VerifierReport, verify_model
from .witness import WitnessStore, generate_witness, public_commitments

__all__ = [
    "MAGIC", "FoldGroup", "ProofBundle", "PublicIO", "deserialize_bundle", "serialize_bundle", "Item",
    "plan_items", "preprocess_model", "prove_model", "Component", "VerifierReport", "verify_model",
    "WitnessStore", "generate_witness", "public_commitments",
]
