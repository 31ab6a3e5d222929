"""Combinatorial kernels shared by the amplitude engines.

Two arithmetic backends live here: exact rationals (``fractions.Fraction``)
and a sign/log-magnitude float used where factorials overflow doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

# Exact rationals: Fraction already keeps lowest terms with a positive
# denominator and is closed under + - * /.
ExactRational = Fraction


def as_rational(value) -> Fraction:
    """Convert ints, Fractions, floats (exact binary value) or "p/q" strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(float(value))


def ln_factorial(n: int) -> float:
    """ln(n!) via the C library log-gamma."""
    n = int(n)
    if n < 0:
        raise ValueError(f"ln_factorial needs n >= 0, got {n}")
    if n < 2:
        return 0.0
    return math.lgamma(n + 1.0)


@lru_cache(maxsize=4096)
def exact_factorial(n: int) -> int:
    return math.factorial(n)


def exact_binomial(n: int, k: int) -> int:
    """C(n, k) as an exact integer; zero outside 0 <= k <= n."""
    if n < 0:
        raise ValueError("exact_binomial needs n >= 0")
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def integrate_periodic(samples: Sequence[complex]) -> complex:
    """(1/2pi) * integral of a periodic function sampled on a uniform grid.

    The grid covers one period with the endpoint dropped, so the rectangle
    and trapezoid rules coincide.  Exact for trigonometric polynomials of
    degree below the number of samples.
    """
    arr = np.asarray(samples)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("integrate_periodic needs at least 2 samples")
    return complex(arr.mean())


def quadrature_grid(n_total: int) -> np.ndarray:
    """Uniform grid of 4(N+1) angles starting at -pi, endpoint excluded."""
    k = 4 * (int(n_total) + 1)
    return -np.pi + 2.0 * np.pi * np.arange(k) / k


@dataclass(frozen=True)
class LogMagnitude:
    """sign * exp(log); sign 0 means the value is exactly zero."""

    sign: int
    log: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or +1")
        if self.sign == 0 and self.log != -math.inf:
            object.__setattr__(self, "log", -math.inf)

    @classmethod
    def zero(cls) -> "LogMagnitude":
        return cls(0, -math.inf)

    @classmethod
    def from_value(cls, x) -> "LogMagnitude":
        """Build from a float, int or Fraction without overflowing."""
        if x == 0:
            return cls.zero()
        sign = 1 if x > 0 else -1
        x = abs(x)
        if isinstance(x, Fraction):
            return cls(sign, _log_int(x.numerator) - _log_int(x.denominator))
        if isinstance(x, int):
            return cls(sign, _log_int(x))
        return cls(sign, math.log(x))

    @classmethod
    def factorial(cls, n: int) -> "LogMagnitude":
        return cls(1, ln_factorial(n))

    def __mul__(self, other: "LogMagnitude") -> "LogMagnitude":
        if self.sign == 0 or other.sign == 0:
            return LogMagnitude.zero()
        return LogMagnitude(self.sign * other.sign, self.log + other.log)

    def __truediv__(self, other: "LogMagnitude") -> "LogMagnitude":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogMagnitude")
        if self.sign == 0:
            return LogMagnitude.zero()
        return LogMagnitude(self.sign * other.sign, self.log - other.log)

    def __pow__(self, k: int) -> "LogMagnitude":
        if k == 0:
            return LogMagnitude(1, 0.0)
        if self.sign == 0:
            return LogMagnitude.zero()
        return LogMagnitude(self.sign ** (k % 2), self.log * k)

    def __add__(self, other: "LogMagnitude") -> "LogMagnitude":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log >= other.log else (other, self)
        ratio = math.exp(small.log - big.log)
        if big.sign == small.sign:
            return LogMagnitude(big.sign, big.log + math.log1p(ratio))
        if ratio == 1.0:
            return LogMagnitude.zero()
        return LogMagnitude(big.sign, big.log + math.log1p(-ratio))

    def __neg__(self) -> "LogMagnitude":
        return LogMagnitude(-self.sign, self.log)

    def sqrt(self) -> "LogMagnitude":
        if self.sign < 0:
            raise ValueError("sqrt of a negative LogMagnitude")
        return LogMagnitude(self.sign, 0.5 * self.log)

    def to_float(self) -> float:
        """Plain float; underflows to 0.0 and overflows to inf as IEEE does."""
        if self.sign == 0:
            return 0.0
        if self.log > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log)

    __float__ = to_float


def _log_int(n: int) -> float:
    # math.log handles arbitrarily large ints without converting to float
    return math.log(n)
