import math
from fractions import Fraction

import numpy as np
import pytest

from noon_forge.numerics import (LogMagnitude, as_rational, exact_binomial, exact_factorial,
                                 integrate_periodic, ln_factorial, quadrature_grid)


def test_ln_factorial_small():
    assert ln_factorial(0) == 0.0
    assert ln_factorial(1) == 0.0


def test_ln_factorial_140_against_big_integer():
    ref = math.log(math.factorial(140))
    assert ln_factorial(140) == pytest.approx(ref, rel=1e-9)
    assert ln_factorial(140) == pytest.approx(555.2202941468948, rel=1e-12)


def test_ln_factorial_matches_exact_up_to_300():
    for n in range(301):
        ratio = math.exp(ln_factorial(n) - math.log(exact_factorial(n)))
        assert abs(ratio - 1) <= 1e-10


def test_ln_factorial_large_relative_accuracy():
    n = 10**6
    # Stirling with four correction terms is far below 1e-13 relative here
    s = n * math.log(n) - n + 0.5 * math.log(2 * math.pi * n) + 1 / (12 * n) - 1 / (360 * n**3)
    assert ln_factorial(n) == pytest.approx(s, rel=1e-13)


def test_ln_factorial_rejects_negative():
    with pytest.raises(ValueError):
        ln_factorial(-1)


def test_binomial_values():
    assert exact_binomial(5, 2) == 10
    assert exact_binomial(0, 0) == 1
    assert exact_binomial(4, -1) == 0
    assert exact_binomial(4, 5) == 0


def test_binomial_140_70_against_pascal():
    row = [1]
    for _ in range(140):
        row = [1] + [a + b for a, b in zip(row, row[1:])] + [1]
    assert exact_binomial(140, 70) == row[70]
    assert all(exact_binomial(140, k) == row[k] for k in range(141))


def test_pascal_identity():
    for n in range(1, 201, 7):
        for k in range(1, n):
            assert exact_binomial(n, k) == exact_binomial(n - 1, k - 1) + exact_binomial(n - 1, k)


def test_integrate_periodic_basic():
    phi = quadrature_grid(5)
    assert integrate_periodic(np.ones_like(phi)) == pytest.approx(1.0)
    assert abs(integrate_periodic(np.exp(1j * phi))) < 1e-15
    assert abs(integrate_periodic(np.exp(1j * np.linspace(-np.pi, np.pi, 2, endpoint=False)))) < 1e-15


def test_integrate_periodic_exact_below_grid_degree():
    K = 24
    phi = -np.pi + 2 * np.pi * np.arange(K) / K
    for d in range(1, K):
        assert abs(integrate_periodic(np.exp(1j * d * phi))) < 1e-13
    assert integrate_periodic(np.exp(1j * K * phi)) == pytest.approx(1.0)


def test_integrate_periodic_linear_and_shift_invariant():
    rng = np.random.default_rng(3)
    phi = quadrature_grid(9)
    f = rng.normal(size=phi.size) + 1j * rng.normal(size=phi.size)
    g = rng.normal(size=phi.size)
    a, b = 2.5 - 1j, -0.75
    lhs = integrate_periodic(a * f + b * g)
    rhs = a * integrate_periodic(f) + b * integrate_periodic(g)
    assert abs(lhs - rhs) < 1e-13
    assert abs(integrate_periodic(np.roll(f, 7)) - integrate_periodic(f)) < 1e-13


def test_integrate_periodic_needs_two_samples():
    with pytest.raises(ValueError):
        integrate_periodic([1.0])


def test_quadrature_grid_size():
    g = quadrature_grid(140)
    assert g.size == 4 * 141
    assert g[0] == -np.pi
    assert g[-1] < np.pi


def test_as_rational():
    assert as_rational("3/7") == Fraction(3, 7)
    assert as_rational(0.25) == Fraction(1, 4)
    assert as_rational(np.int64(5)) == 5


def test_log_magnitude_arithmetic():
    a = LogMagnitude.from_value(-6.0)
    b = LogMagnitude.from_value(2.0)
    assert (a * b).to_float() == pytest.approx(-12.0)
    assert (a / b).to_float() == pytest.approx(-3.0)
    assert (a + b).to_float() == pytest.approx(-4.0)
    assert (a ** 3).to_float() == pytest.approx(-216.0)
    assert (a ** 2).sign == 1
    assert (b.sqrt()).to_float() == pytest.approx(math.sqrt(2))
    assert (a + (-a)).sign == 0
    assert LogMagnitude.zero().to_float() == 0.0


def test_log_magnitude_handles_huge_values():
    big = LogMagnitude.from_value(math.factorial(300))
    assert big.log == pytest.approx(ln_factorial(300), rel=1e-13)
    frac = LogMagnitude.from_value(Fraction(1, math.factorial(200)))
    assert frac.sign == 1 and frac.log == pytest.approx(-ln_factorial(200), rel=1e-13)
    assert (big * frac).log == pytest.approx(ln_factorial(300) - ln_factorial(200), rel=1e-12)
    assert big.to_float() == math.inf


def test_log_magnitude_zero_sentinel():
    z = LogMagnitude(0, 5.0)
    assert z.log == -math.inf
    with pytest.raises(ValueError):
        LogMagnitude(2, 0.0)
    with pytest.raises(ZeroDivisionError):
        LogMagnitude.from_value(1) / LogMagnitude.zero()
