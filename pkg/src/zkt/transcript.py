"""Fiat-Shamir transcripts and the two random oracles used by the accumulator.

``rho_nark`` derives the block-level challenges, ``rho_acc`` derives folding
challenges. Both are domain-separated SHA3 instances mapped into the field.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Any

from .algebra.curve import G1, G2, GT
from .algebra.field import MODULUS


def encode(item: Any) -> bytes:
    """Canonical, length-prefixed byte encoding for transcript absorption."""
    if isinstance(item, bool):
        return b"b" + (b"\x01" if item else b"\x00")
    if isinstance(item, int):
        return b"f" + (item % MODULUS).to_bytes(32, "little")
    if isinstance(item, (G1, G2, GT)):
        tag = {G1: b"1", G2: b"2", GT: b"T"}[type(item)]
        return tag + item.to_bytes()
    if isinstance(item, bytes):
        return b"y" + struct.pack("<Q", len(item)) + item
    if isinstance(item, str):
        data = item.encode()
        return b"s" + struct.pack("<Q", len(data)) + data
    if isinstance(item, (list, tuple)):
        return b"l" + struct.pack("<Q", len(item)) + b"".join(encode(x) for x in item)
    if item is None:
        return b"n"
    raise TypeError(f"cannot absorb {type(item).__name__}")


def _to_field(digest: bytes) -> int:
    return int.from_bytes(digest, "little") % MODULUS


def rho(tag: str, *items: Any) -> int:
    h = hashlib.shake_256()
    h.update(encode(tag))
    for it in items:
        h.update(encode(it))
    return _to_field(h.digest(64))


def rho_nark(*items: Any) -> int:
    return rho("NARK", *items)


def rho_acc(*items: Any) -> int:
    return rho("ACC", *items)


class Transcript:
    """Stateful sponge-style transcript for interactive protocols."""

    def __init__(self, label: str = "zkt"):
        self._state = hashlib.sha3_256(encode(label)).digest()

    def absorb(self, label: str, *items: Any) -> None:
        h = hashlib.sha3_256(self._state)
        h.update(encode(label))
        for it in items:
            h.update(encode(it))
        self._state = h.digest()

    def challenge(self, label: str) -> int:
        h = hashlib.shake_256(self._state + encode("challenge") + encode(label))
        out = _to_field(h.digest(64))
        self.absorb("squeezed", label, out)
        return out

    def fork(self, label: str) -> "Transcript":
        t = Transcript.__new__(Transcript)
        t._state = hashlib.sha3_256(self._state + encode("fork") + encode(label)).digest()
        return t

    @property
    def state(self) -> bytes:
        return self._state
