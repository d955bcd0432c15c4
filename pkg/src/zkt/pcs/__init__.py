"""KZG polynomial commitment scheme."""

from .kzg import (
    BatchOpeningProof,
    Commitment,
    OpeningProof,
    Srs,
    batch_open,
    commit,
    commit_g2,
    load_srs,
    open,
    save_srs,
    setup,
    srs_from_bytes,
    srs_to_bytes,
    verify_batch,
    verify_open,
)

__all__ = [
    "BatchOpeningProof", "Commitment", "OpeningProof", "Srs", "batch_open", "commit",
    "commit_g2", "load_srs", "open", "save_srs", "setup", "srs_from_bytes", "srs_to_bytes",
    "verify_batch", "verify_open",
]
