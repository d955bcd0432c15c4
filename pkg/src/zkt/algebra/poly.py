"""Univariate polynomials and radix-2 evaluation domains over the scalar field."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from ..errors import ConfigurationError, ShapeError, WitnessInvalidError
from .field import MODULUS as P
from .field import FieldError, batch_inv, inv, root_of_unity

SCHOOLBOOK_CUTOFF = 64


def _trim(coeffs: Iterable[int]) -> tuple[int, ...]:
    c = [x % P for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


class Polynomial:
    """Immutable polynomial in coefficient form, low degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[int] = ()):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    def __reduce__(self):
        return (Polynomial, (self.coeffs,))

    @classmethod
    def constant(cls, c: int) -> "Polynomial":
        return cls((c,))

    @classmethod
    def x(cls) -> "Polynomial":
        return cls((0, 1))

    @classmethod
    def monomial(cls, k: int, c: int = 1) -> "Polynomial":
        return cls([0] * k + [c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __len__(self) -> int:
        return len(self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = Polynomial((other,))
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        if len(self.coeffs) > 6:
            return f"Polynomial(deg={self.degree})"
        return f"Polynomial({list(self.coeffs)})"

    def __call__(self, x: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % P
        return acc

    evaluate = __call__

    def __add__(self, other) -> "Polynomial":
        if isinstance(other, int):
            other = Polynomial((other,))
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(-c for c in self.coeffs)

    def __sub__(self, other) -> "Polynomial":
        if isinstance(other, int):
            other = Polynomial((other,))
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, int):
            return self.scale(other)
        return Polynomial(poly_mul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def scale(self, c: int) -> "Polynomial":
        c %= P
        return Polynomial(x * c for x in self.coeffs)

    def shift(self, k: int) -> "Polynomial":
        """Multiply by X^k."""
        if not self.coeffs:
            return self
        return Polynomial((0,) * k + self.coeffs)

    def dilate(self, a: int) -> "Polynomial":
        """Return f(a·X)."""
        out, acc = [], 1
        for c in self.coeffs:
            out.append(c * acc)
            acc = acc * a % P
        return Polynomial(out)

    def divmod_vanishing(self, n: int) -> tuple["Polynomial", "Polynomial"]:
        """Divide by X^n - 1, returning (quotient, remainder)."""
        r = list(self.coeffs)
        if len(r) <= n:
            return Polynomial(), self
        q = [0] * (len(r) - n)
        for i in range(len(r) - 1, n - 1, -1):
            c = r[i]
            q[i - n] = c
            r[i - n] = (r[i - n] + c) % P
            r[i] = 0
        return Polynomial(q), Polynomial(r[:n])

    def divmod_linear(self, x: int) -> tuple["Polynomial", int]:
        """Synthetic division by (X - x): returns (q, f(x))."""
        c = self.coeffs
        if not c:
            return Polynomial(), 0
        q = [0] * (len(c) - 1)
        acc = 0
        for i in range(len(c) - 1, 0, -1):
            acc = (acc * x + c[i]) % P
            q[i - 1] = acc
        rem = (acc * x + c[0]) % P
        return Polynomial(q), rem


def poly_mul(a: Sequence[int], b: Sequence[int]) -> list[int]:
    if not a or not b:
        return []
    if min(len(a), len(b)) < SCHOOLBOOK_CUTOFF:
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for j, y in enumerate(b):
                out[i + j] += x * y
        return [v % P for v in out]
    size = len(a) + len(b) - 1
    n = 1 << (size - 1).bit_length()
    dom = domain_new(n)
    fa = dom.fft(list(a) + [0] * (n - len(a)))
    fb = dom.fft(list(b) + [0] * (n - len(b)))
    return dom.ifft([x * y % P for x, y in zip(fa, fb)])[:size]


def _ntt(values: list[int], twiddles: Sequence[int]) -> list[int]:
    """In-place iterative radix-2 transform; twiddles[k] = w^k for k < n/2."""
    a = values
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
                v = a[start + k + half] * tw[k] % P
                a[start + k] = (u + v) % P
                a[start + k + half] = (u - v) % P
        length <<= 1
    return a


@dataclass(frozen=True)
class EvaluationDomain:
    """Multiplicative subgroup H of size n generated by omega."""

    n: int
    omega: int
    _tw: tuple[int, ...] = field(repr=False, compare=False, default=())
    _itw: tuple[int, ...] = field(repr=False, compare=False, default=())

    @property
    def omega_inv(self) -> int:
        return inv(self.omega)

    @property
    def n_inv(self) -> int:
        return inv(self.n)

    @property
    def elements(self) -> list[int]:
        out, acc = [], 1
        for _ in range(self.n):
            out.append(acc)
            acc = acc * self.omega % P
        return out

    def element(self, i: int) -> int:
        return pow(self.omega, i % self.n, P)

    def fft(self, coeffs: Sequence[int]) -> list[int]:
        """Evaluate a coefficient vector (length <= n) on H."""
        if len(coeffs) > self.n:
            # fold higher coefficients: X^n = 1 on H
            folded = [0] * self.n
            for i, c in enumerate(coeffs):
                folded[i % self.n] += c
            coeffs = folded
        a = [c % P for c in coeffs] + [0] * (self.n - len(coeffs))
        if self.n == 1:
            return a
        return _ntt(a, self._tw)

    def ifft(self, evals: Sequence[int]) -> list[int]:
        if len(evals) != self.n:
            raise ShapeError(f"expected {self.n} evaluations, got {len(evals)}")
        a = [e % P for e in evals]
        if self.n == 1:
            return a
        a = _ntt(a, self._itw)
        ninv = self.n_inv
        return [x * ninv % P for x in a]

    def coset_fft(self, coeffs: Sequence[int], shift: int) -> list[int]:
        scaled, acc = [], 1
        for c in coeffs:
            scaled.append(c * acc % P)
            acc = acc * shift % P
        return self.fft(scaled)

    def coset_ifft(self, evals: Sequence[int], shift: int) -> list[int]:
        coeffs = self.ifft(evals)
        sinv, acc, out = inv(shift), 1, []
        for c in coeffs:
            out.append(c * acc % P)
            acc = acc * sinv % P
        return out

    def vanishing_eval(self, z: int) -> int:
        return (pow(z, self.n, P) - 1) % P

    def lagrange_eval(self, i: int, z: int) -> int:
        """L_i(z) for the Lagrange basis of H."""
        w = self.element(i)
        zh = self.vanishing_eval(z)
        if zh == 0:
            return 1 if z % P == w else 0
        return w * zh % P * inv(self.n * (z - w)) % P

    def lagrange_evals(self, z: int) -> list[int]:
        zh = self.vanishing_eval(z)
        ws = self.elements
        if zh == 0:
            return [1 if z % P == w else 0 for w in ws]
        invs = batch_inv([(z - w) % P for w in ws])
        c = zh * self.n_inv % P
        return [c * w % P * iv % P for w, iv in zip(ws, invs)]

    def barycentric_eval(self, evals: Sequence[int], z: int) -> int:
        """Evaluate the interpolant of evals (given on H) at z without an inverse FFT."""
        if len(evals) != self.n:
            raise ShapeError(f"expected {self.n} evaluations, got {len(evals)}")
        return sum(e * l for e, l in zip(evals, self.lagrange_evals(z))) % P


@lru_cache(maxsize=64)
def domain_new(n: int) -> EvaluationDomain:
    try:
        w = root_of_unity(n)
    except FieldError as exc:
        raise ConfigurationError(str(exc)) from None
    half = max(n // 2, 1)
    tw, itw = [1] * half, [1] * half
    wi = inv(w)
    for k in range(1, half):
        tw[k] = tw[k - 1] * w % P
        itw[k] = itw[k - 1] * wi % P
    return EvaluationDomain(n, w, tuple(tw), tuple(itw))


def interpolate(evals: Sequence[int], domain: EvaluationDomain) -> Polynomial:
    if len(evals) != domain.n:
        raise ShapeError(f"interpolate: {len(evals)} values for a domain of size {domain.n}")
    return Polynomial(domain.ifft(evals))


def evaluate_on(f: Polynomial, domain: EvaluationDomain) -> list[int]:
    return domain.fft(f.coeffs)


def quotient_by_vanishing(numerator: Polynomial, domain: EvaluationDomain) -> Polynomial:
    q, r = numerator.divmod_vanishing(domain.n)
    if not r.is_zero():
        raise WitnessInvalidError(f"numerator does not vanish on the size-{domain.n} domain")
    return q


def quotient_linear(f: Polynomial, x: int, y: int) -> Polynomial:
    q, rem = f.divmod_linear(x)
    if rem != y % P:
        raise WitnessInvalidError("claimed evaluation does not match f(x)")
    return q


def interpolate_points(xs: Sequence[int], ys: Sequence[int]) -> Polynomial:
    """Lagrange interpolation through arbitrary distinct points (quadratic time)."""
    if len(xs) != len(ys):
        raise ShapeError("interpolate_points: length mismatch")
    result = Polynomial()
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        num = Polynomial((1,))
        den = 1
        for j, xj in enumerate(xs):
            if j != i:
                num = num * Polynomial((-xj, 1))
                den = den * (xi - xj) % P
        result = result + num.scale(yi * inv(den))
    return result


def vanishing_poly(n: int) -> Polynomial:
    return Polynomial([-1] + [0] * (n - 1) + [1])
