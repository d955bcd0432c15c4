"""Witness rows and SRS-derived constants shared by the block protocols."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..algebra.curve import G1, G2
from ..algebra.field import MODULUS as P
from ..algebra.poly import Polynomial, domain_new, interpolate
from ..errors import DegreeError, ShapeError
from ..pcs.kzg import Srs


@dataclass(frozen=True)
class Row:
    """One committed vector: evaluations on H_n, its interpolant, and [f(tau)]_1."""

    values: tuple[int, ...]
    poly: Polynomial
    com: G1

    @property
    def n(self) -> int:
        return len(self.values)


def commit_values(srs: Srs, values: Sequence[int]) -> Row:
    n = len(values)
    if n == 0 or n & (n - 1):
        raise ShapeError(f"row length {n} is not a power of two")
    vals = tuple(v % P for v in values)
    poly = interpolate(vals, domain_new(n))
    return Row(vals, poly, srs.commit_coeffs(poly.coeffs))


def commit_poly(srs: Srs, poly: Polynomial) -> G1:
    return srs.commit_coeffs(poly.coeffs)


def commit_shifted(srs: Srs, poly: Polynomial, bound: int) -> G1:
    """[tau^(D-bound) * p(tau)]_1: only computable when deg(p) <= bound."""
    if poly.degree > bound:
        raise DegreeError(f"degree {poly.degree} exceeds bound {bound}")
    if bound < 0:
        return G1.zero()
    return srs.commit_coeffs(poly.coeffs, srs.degree_shift(bound))


def const(srs: Srs, name: str):
    """Resolve a ``$``-constant name against the SRS."""
    if name == "$g1":
        return srs.g1
    if name == "$g2":
        return srs.g2
    if name == "$tau2":
        return srs.g2_powers[1]
    kind, _, arg = name[1:].partition(":")
    if kind == "zh":
        return srs.g2_vanishing(int(arg))
    if kind == "deg":
        bound = int(arg)
        if bound < 0:
            return srs.g2
        return srs.g2_power(srs.degree_shift(bound))
    if kind == "pw2":
        return srs.g2_power(int(arg))
    raise KeyError(name)


def srs_consts(srs: Srs, names: Sequence[str]) -> dict:
    return {n: const(srs, n) for n in names}


def ones(n: int) -> tuple[int, ...]:
    return (1,) * n


def g2_zero() -> G2:
    return G2.zero()
