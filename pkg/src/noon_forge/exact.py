"""Exact arithmetic in Q(i)[sqrt(D)].

Values of the form (a + i b) + (c + i d) sqrt(D) with integer or rational
parts.  Polynomials over this ring are stored as four numpy object arrays
of Python ints so that products never lose precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from .numerics import LogMagnitude


def split_surd(t: Fraction) -> tuple[Fraction, int]:
    """Write sqrt(t) = scale * sqrt(D) with rational scale and integer D.

    D == 1 means sqrt(t) is rational.
    """
    if t < 0:
        raise ValueError("negative radicand")
    if t == 0:
        return Fraction(0), 1
    p, q = t.numerator, t.denominator
    d = p * q
    root = math.isqrt(d)
    if root * root == d:
        return Fraction(root, q), 1
    return Fraction(1, q), d


@dataclass(frozen=True)
class SurdValue:
    """Exact real number rat + surd * sqrt(radicand)."""

    rat: Fraction
    surd: Fraction = Fraction(0)
    radicand: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rat", Fraction(self.rat))
        object.__setattr__(self, "surd", Fraction(self.surd))
        if self.radicand == 1 and self.surd != 0:
            object.__setattr__(self, "rat", self.rat + self.surd)
            object.__setattr__(self, "surd", Fraction(0))

    def _coerce(self, other) -> "SurdValue":
        if isinstance(other, SurdValue):
            return other
        return SurdValue(Fraction(other), 0, self.radicand)

    def _d(self, o: "SurdValue") -> int:
        if self.radicand == o.radicand or o.surd == 0:
            return self.radicand
        if self.surd == 0:
            return o.radicand
        raise ValueError("mixing different radicands")

    def __add__(self, other):
        o = self._coerce(other)
        return SurdValue(self.rat + o.rat, self.surd + o.surd, self._d(o))

    __radd__ = __add__

    def __neg__(self):
        return SurdValue(-self.rat, -self.surd, self.radicand)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        d = self._d(o)
        return SurdValue(self.rat * o.rat + d * self.surd * o.surd,
                         self.rat * o.surd + self.surd * o.rat, d)

    __rmul__ = __mul__

    def inverse(self) -> "SurdValue":
        norm = self.rat * self.rat - self.radicand * self.surd * self.surd
        if norm == 0:
            raise ZeroDivisionError("division by an exact zero")
        return SurdValue(self.rat / norm, -self.surd / norm, self.radicand)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        if self.surd != 0 and o.surd != 0 and self.radicand != o.radicand:
            return False
        return self.rat == o.rat and self.surd == o.surd

    def __hash__(self):
        return hash((self.rat, self.surd, self.radicand))

    def is_zero(self) -> bool:
        return self.rat == 0 and self.surd == 0

    def to_mpfr(self, bits: int = 256):
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            val = gmpy2.mpq(self.rat.numerator, self.rat.denominator)
            val = gmpy2.mpfr(val)
            if self.surd != 0:
                val += gmpy2.mpfr(gmpy2.mpq(self.surd.numerator, self.surd.denominator)) * gmpy2.sqrt(
                    gmpy2.mpfr(self.radicand))
            return val

    def __float__(self) -> float:
        if self.surd == 0:
            return float(self.rat)
        return float(self.to_mpfr())

    def to_log(self) -> LogMagnitude:
        if self.is_zero():
            return LogMagnitude.zero()
        v = self.to_mpfr(max(256, 4 * _bitsize(self)))
        return LogMagnitude(1 if v > 0 else -1, float(gmpy2.log(abs(v))))

    def __repr__(self):
        if self.surd == 0:
            return f"SurdValue({self.rat})"
        return f"SurdValue({self.rat} + {self.surd}*sqrt({self.radicand}))"


def _bitsize(v: SurdValue) -> int:
    return max(v.rat.numerator.bit_length(), v.rat.denominator.bit_length(),
               v.surd.numerator.bit_length(), v.surd.denominator.bit_length(), 1)


# ---------------------------------------------------------------------------
# Gaussian-surd scalars: (re, im, sre, sim) meaning (re + i im) + (sre + i sim) sqrt(D)

@dataclass(frozen=True)
class GaussSurd:
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)
    sre: Fraction = Fraction(0)
    sim: Fraction = Fraction(0)

    @classmethod
    def unit(cls, quarter_turns: int) -> "GaussSurd":
        k = quarter_turns % 4
        return cls(*[(1, 0), (0, 1), (-1, 0), (0, -1)][k])

    @property
    def parts(self):
        return (self.re, self.im, self.sre, self.sim)

    def has_surd(self) -> bool:
        return self.sre != 0 or self.sim != 0

    def has_rational(self) -> bool:
        return self.re != 0 or self.im != 0

    def __add__(self, o: "GaussSurd") -> "GaussSurd":
        return GaussSurd(self.re + o.re, self.im + o.im, self.sre + o.sre, self.sim + o.sim)

    def __neg__(self):
        return GaussSurd(-self.re, -self.im, -self.sre, -self.sim)

    def __sub__(self, o):
        return self + (-o)

    def mul(self, o: "GaussSurd", t: Fraction) -> "GaussSurd":
        """Product where the surd symbol s satisfies s*s = t."""
        re = self.re * o.re - self.im * o.im + t * (self.sre * o.sre - self.sim * o.sim)
        im = self.re * o.im + self.im * o.re + t * (self.sre * o.sim + self.sim * o.sre)
        sre = self.re * o.sre - self.im * o.sim + self.sre * o.re - self.sim * o.im
        sim = self.re * o.sim + self.im * o.sre + self.sre * o.im + self.sim * o.re
        return GaussSurd(re, im, sre, sim)

    def scale(self, k) -> "GaussSurd":
        k = Fraction(k)
        return GaussSurd(self.re * k, self.im * k, self.sre * k, self.sim * k)

    def drop_surd(self) -> "GaussSurd":
        """Reinterpret a purely-surd value s*(x) as the rational value x."""
        return GaussSurd(self.sre, self.sim)

    def to_complex(self, s: float) -> complex:
        return complex(float(self.re) + float(self.sre) * s, float(self.im) + float(self.sim) * s)


# ---------------------------------------------------------------------------
# integer ring polynomials

class RingPoly:
    """Polynomial with coefficients in Z[i][sqrt(D)].

    ``r``/``i`` hold the rational real/imaginary parts, ``sr``/``si`` the
    parts multiplying sqrt(D).  ``sr`` is None when no surd part exists.
    """

    __slots__ = ("r", "i", "sr", "si")

    def __init__(self, r, i, sr=None, si=None):
        self.r, self.i, self.sr, self.si = r, i, sr, si

    @classmethod
    def one(cls, surd: bool) -> "RingPoly":
        one = np.array([1], dtype=object)
        zero = np.array([0], dtype=object)
        if surd:
            return cls(one, zero.copy(), zero.copy(), zero.copy())
        return cls(one, zero.copy())

    def __len__(self):
        return len(self.r)

    def coeff(self, k: int) -> tuple:
        if k < 0 or k >= len(self.r):
            return (0, 0, 0, 0)
        if self.sr is None:
            return (self.r[k], self.i[k], 0, 0)
        return (self.r[k], self.i[k], self.sr[k], self.si[k])


def _comb(pairs):
    """Sum of scalar*array over pairs, skipping zero scalars."""
    out = None
    for c, arr in pairs:
        if c == 0 or arr is None:
            continue
        term = arr * c if c != 1 else arr
        out = term if out is None else out + term
    return out


def _fill(arr, n):
    return arr if arr is not None else np.zeros(n, dtype=object)


def scalar_times(p: RingPoly, s: tuple, d: int) -> RingPoly:
    """p * s for an integer ring scalar s = (re, im, sre, sim)."""
    ar, ai, br, bi = s
    n = len(p.r)
    pr, pi, qr, qi = p.r, p.i, p.sr, p.si
    surd = qr is not None or br != 0 or bi != 0
    re = _comb([(ar, pr), (-ai, pi), (d * br, qr), (-d * bi, qi)])
    im = _comb([(ai, pr), (ar, pi), (d * bi, qr), (d * br, qi)])
    if not surd:
        return RingPoly(_fill(re, n), _fill(im, n))
    sre = _comb([(br, pr), (-bi, pi), (ar, qr), (-ai, qi)])
    sim = _comb([(bi, pr), (br, pi), (ai, qr), (ar, qi)])
    return RingPoly(_fill(re, n), _fill(im, n), _fill(sre, n), _fill(sim, n))


def _shift_add(hi: RingPoly, lo: RingPoly, cap: int) -> RingPoly:
    """x*hi + lo, truncated to degree <= cap."""
    n = min(len(lo) + 1, cap + 1)

    def part(a, b):
        if a is None and b is None:
            return None
        out = np.zeros(n, dtype=object)
        if b is not None:
            m = min(len(b), n)
            out[:m] += b[:m]
        if a is not None:
            m = min(len(a), n - 1)
            out[1:m + 1] += a[:m]
        return out

    surd = hi.sr is not None or lo.sr is not None
    r, i = part(hi.r, lo.r), part(hi.i, lo.i)
    if not surd:
        return RingPoly(r, i)
    return RingPoly(r, i, _fill(part(hi.sr, lo.sr), n), _fill(part(hi.si, lo.si), n))


def times_linear(p: RingPoly, alpha: tuple, beta: tuple, d: int, cap: int) -> RingPoly:
    """p * (alpha x + beta), truncated to degree <= cap."""
    return _shift_add(scalar_times(p, alpha, d), scalar_times(p, beta, d), cap)


def ring_dot(p: RingPoly, q: RingPoly, d: int) -> tuple:
    """sum_k p[k] * q[k] over the common length, as an integer ring scalar."""
    n = min(len(p), len(q))
    if n == 0:
        return (0, 0, 0, 0)
    pr, pi, qr, qi = p.r[:n], p.i[:n], q.r[:n], q.i[:n]
    re = np.dot(pr, qr) - np.dot(pi, qi)
    im = np.dot(pr, qi) + np.dot(pi, qr)
    sre = sim = 0
    psr = p.sr[:n] if p.sr is not None else None
    psi = p.si[:n] if p.si is not None else None
    qsr = q.sr[:n] if q.sr is not None else None
    qsi = q.si[:n] if q.si is not None else None
    if psr is not None and qsr is not None:
        re += d * (np.dot(psr, qsr) - np.dot(psi, qsi))
        im += d * (np.dot(psr, qsi) + np.dot(psi, qsr))
    if psr is not None:
        sre += np.dot(psr, qr) - np.dot(psi, qi)
        sim += np.dot(psr, qi) + np.dot(psi, qr)
    if qsr is not None:
        sre += np.dot(pr, qsr) - np.dot(pi, qsi)
        sim += np.dot(pr, qsi) + np.dot(pi, qsr)
    return (int(re), int(im), int(sre), int(sim))


def reversed_window(p: RingPoly, top: int) -> RingPoly:
    """Coefficients p[top], p[top-1], ..., p[0] (zeros where p is short)."""
    def part(a):
        if a is None:
            return None
        out = np.zeros(top + 1, dtype=object)
        m = min(len(a), top + 1)
        out[:m] = a[:m]
        return out[::-1].copy()
    return RingPoly(part(p.r), part(p.i), part(p.sr), part(p.si))


def abs2(s: tuple, d: int) -> tuple[int, int]:
    """|s|^2 = A + B sqrt(D) for an integer ring scalar s."""
    re, im, sre, sim = s
    return (re * re + im * im + d * (sre * sre + sim * sim), 2 * (re * sre + im * sim))
