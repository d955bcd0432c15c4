"""Zero-knowledge proofs of ML inference built from foldable pairing blocks."""

__version__ = "0.1.0"
