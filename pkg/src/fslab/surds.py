"""Exact arithmetic in the field Q(2^(1/q)).

Powers 2^(-l p / q) of a rational exponent are not rational, but every sum of
them is a polynomial in ``u = 2^(-1/q)`` of degree below ``q`` with rational
coefficients (``u^q = 1/2``).  Signs are decided rigorously: a float filter
first, then interval evaluation with integer root brackets of growing
precision.  Since ``x^q - 2`` is irreducible, a nonzero coefficient vector is
a nonzero number, so the refinement loop terminates.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache, total_ordering

_FILTER_REL = 1e-9


def _iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for integers n >= 0, k >= 1."""
    if n < 2 or k == 1:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


@lru_cache(maxsize=None)
def _u_bracket(q: int, bits: int) -> tuple[Fraction, Fraction]:
    """Rational bounds lo <= 2^(-1/q) <= hi."""
    s = _iroot(1 << (bits * q + 1), q)  # s <= 2^(1/q) 2^bits < s + 1
    scale = 1 << bits
    return Fraction(scale, s + 1), Fraction(scale, s)


@lru_cache(maxsize=None)
def _u_float(q: int) -> float:
    return 2.0 ** (-1.0 / q)


@total_ordering
class Surd:
    __slots__ = ("q", "coeffs")

    def __init__(self, q: int, coeffs):
        self.q = q
        self.coeffs = tuple(Fraction(c) for c in coeffs)
        if len(self.coeffs) != q:
            raise ValueError("coefficient vector has the wrong length")

    @classmethod
    def zero(cls, q: int) -> "Surd":
        return cls(q, (0,) * q)

    @classmethod
    def rational(cls, q: int, value) -> "Surd":
        return cls(q, (value,) + (0,) * (q - 1))

    @classmethod
    def power(cls, q: int, exponent: int) -> "Surd":
        """u^exponent for an integer exponent."""
        whole, rest = divmod(exponent, q)
        coeffs = [Fraction(0)] * q
        coeffs[rest] = Fraction(1, 2) ** whole if whole >= 0 else Fraction(2) ** (-whole)
        return cls(q, coeffs)

    def _coerce(self, other) -> "Surd":
        if isinstance(other, Surd):
            if other.q != self.q:
                raise ValueError("mixing surds of different degree")
            return other
        if isinstance(other, (int, Fraction)):
            return Surd.rational(self.q, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Surd(self.q, (a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return Surd(self.q, (-a for a in self.coeffs))

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Surd(self.q, (a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        q = self.q
        out = [Fraction(0)] * q
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(other.coeffs):
                if not b:
                    continue
                k = i + j
                if k >= q:
                    out[k - q] += a * b / 2
                else:
                    out[k] += a * b
        return Surd(q, out)

    __rmul__ = __mul__

    def inverse(self) -> "Surd":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        q = self.q
        # column k of the multiplication matrix is self * u^k
        cols = [(self * Surd.power(q, k)).coeffs for k in range(q)]
        rows = [[cols[k][i] for k in range(q)] + [Fraction(int(i == 0))] for i in range(q)]
        for c in range(q):
            pivot = next(r for r in range(c, q) if rows[r][c] != 0)
            rows[c], rows[pivot] = rows[pivot], rows[c]
            inv = 1 / rows[c][c]
            rows[c] = [v * inv for v in rows[c]]
            for r in range(q):
                if r != c and rows[r][c] != 0:
                    factor = rows[r][c]
                    rows[r] = [a - factor * b for a, b in zip(rows[r], rows[c])]
        return Surd(q, (rows[i][q] for i in range(q)))

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if all(c == 0 for c in other.coeffs[1:]):
            return Surd(self.q, (a / other.coeffs[0] for a in self.coeffs))
        return self * other.inverse()

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def sign(self) -> int:
        if self.is_zero():
            return 0
        u = _u_float(self.q)
        approx, scale, power = 0.0, 0.0, 1.0
        for c in self.coeffs:
            term = float(c) * power
            approx += term
            scale += abs(term)
            power *= u
        if abs(approx) > _FILTER_REL * scale:
            return 1 if approx > 0 else -1
        bits = 64
        while True:
            lo, hi = _u_bracket(self.q, bits)
            low = high = Fraction(0)
            plo = phi = Fraction(1)
            for c in self.coeffs:
                if c > 0:
                    low += c * plo
                    high += c * phi
                elif c < 0:
                    low += c * phi
                    high += c * plo
                plo *= lo
                phi *= hi
            if low > 0:
                return 1
            if high < 0:
                return -1
            bits *= 2

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.q, self.coeffs))

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return (self - other).sign() < 0

    def __float__(self) -> float:
        u = _u_float(self.q)
        return float(sum(float(c) * u ** k for k, c in enumerate(self.coeffs)))

    def __repr__(self) -> str:
        terms = [f"{c}*u^{k}" for k, c in enumerate(self.coeffs) if c]
        return f"Surd(q={self.q}: {' + '.join(terms) or '0'}, u=2^(-1/{self.q}))"
