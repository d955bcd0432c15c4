"""Arithmetic in the BN254 scalar field.

Elements are plain Python ints in ``[0, MODULUS)``. Signed quantized values
are mapped with :func:`encode_signed` / :func:`decode_signed`.
"""

from __future__ import annotations

from typing import Iterable, Sequence

MODULUS = 21888242871839275222246405745257275088548364400416034343698204186575808495617
TWO_ADICITY = 28
# 5 generates the multiplicative group; its odd part gives a 2^28-th root.
MULTIPLICATIVE_GENERATOR = 5
_ROOT_2_28 = pow(MULTIPLICATIVE_GENERATOR, (MODULUS - 1) >> TWO_ADICITY, MODULUS)
HALF = MODULUS // 2


class FieldError(ValueError):
    """Raised for elements outside the canonical range or undefined operations."""


def reduce(x: int) -> int:
    return x % MODULUS


def inv(x: int) -> int:
    x %= MODULUS
    if x == 0:
        raise FieldError("inverse of zero")
    return pow(x, MODULUS - 2, MODULUS)


def batch_inv(xs: Sequence[int]) -> list[int]:
    """Montgomery batch inversion; raises on any zero entry."""
    n = len(xs)
    if n == 0:
        return []
    prefix = [0] * n
    acc = 1
    for i, x in enumerate(xs):
        if x % MODULUS == 0:
            raise FieldError("inverse of zero")
        prefix[i] = acc
        acc = acc * x % MODULUS
    acc_inv = pow(acc, MODULUS - 2, MODULUS)
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = acc_inv * prefix[i] % MODULUS
        acc_inv = acc_inv * xs[i] % MODULUS
    return out


def root_of_unity(n: int) -> int:
    """Primitive n-th root of unity for n a power of two up to 2^28."""
    if n <= 0 or n & (n - 1):
        raise FieldError(f"domain size {n} is not a power of two")
    log_n = n.bit_length() - 1
    if log_n > TWO_ADICITY:
        raise FieldError(f"domain size 2^{log_n} exceeds two-adicity {TWO_ADICITY}")
    return pow(_ROOT_2_28, 1 << (TWO_ADICITY - log_n), MODULUS)


def encode_signed(v: int) -> int:
    """Map a signed integer into the field (negatives wrap to p - |v|)."""
    if not -HALF <= v <= HALF:
        raise FieldError(f"value {v} out of the field-safe signed range")
    return v % MODULUS


def decode_signed(x: int) -> int:
    x %= MODULUS
    return x - MODULUS if x > HALF else x


def inner(a: Iterable[int], b: Iterable[int]) -> int:
    return sum(x * y for x, y in zip(a, b)) % MODULUS


def powers(base: int, n: int, start: int = 1) -> list[int]:
    out = [0] * n
    acc = start % MODULUS
    for i in range(n):
        out[i] = acc
        acc = acc * base % MODULUS
    return out


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()
