"""Radix-2 FFTs whose data live in a source group (scalars act on points)."""

from __future__ import annotations

from typing import Sequence

from ..algebra.field import MODULUS as P
from ..algebra.poly import EvaluationDomain


def _group_ntt(a: list, twiddles: Sequence[int]) -> list:
    n = len(a)
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            a[i], a[j] = a[j], a[i]
    length = 2
    while length <= n:
        half = length >> 1
        step = n // length
        tw = twiddles[::step][:half]
        for start in range(0, n, length):
            for k in range(half):
                u = a[start + k]
                v = a[start + k + half]
                if k:
                    v = v * tw[k]
                a[start + k] = u + v
                a[start + k + half] = u - v
        length <<= 1
    return a


def group_fft(points: Sequence, domain: EvaluationDomain) -> list:
    """out_i = sum_k points_k * omega^(ik)."""
    a = list(points) + [type(points[0]).zero()] * (domain.n - len(points))
    if domain.n == 1:
        return a
    return _group_ntt(a, domain._tw)


def group_ifft(points: Sequence, domain: EvaluationDomain) -> list:
    """out_i = (1/n) sum_k points_k * omega^(-ik)."""
    if domain.n == 1:
        return list(points)
    a = _group_ntt(list(points), domain._itw)
    ninv = domain.n_inv
    return [p * ninv for p in a]


def scale_all(points: Sequence, scalars: Sequence[int]) -> list:
    return [p * (s % P) for p, s in zip(points, scalars)]
