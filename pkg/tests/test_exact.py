import math
from fractions import Fraction

import pytest

from noon_forge.exact import GaussSurd, RingPoly, SurdValue, split_surd, times_linear


def test_split_surd():
    assert split_surd(Fraction(4, 9)) == (Fraction(2, 3), 1)
    scale, d = split_surd(Fraction(2, 3))
    assert d == 6
    assert float(scale) * math.sqrt(d) == pytest.approx(math.sqrt(2 / 3))
    assert split_surd(Fraction(0)) == (Fraction(0), 1)
    with pytest.raises(ValueError):
        split_surd(Fraction(-1))


def test_surd_field_operations():
    a = SurdValue(Fraction(1, 2), Fraction(3), 5)
    b = SurdValue(Fraction(-2), Fraction(1, 7), 5)
    x, y = float(a), float(b)
    assert float(a + b) == pytest.approx(x + y)
    assert float(a - b) == pytest.approx(x - y)
    assert float(a * b) == pytest.approx(x * y)
    assert float(a / b) == pytest.approx(x / y)
    assert a * a.inverse() == SurdValue(1)
    assert (a - a).is_zero()


def test_surd_with_square_radicand_folds():
    v = SurdValue(Fraction(1), Fraction(2), 1)
    assert v.surd == 0 and v.rat == 3


def test_surd_mixing_radicands_rejected():
    with pytest.raises(ValueError):
        SurdValue(0, 1, 2) + SurdValue(0, 1, 3)


def test_surd_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        SurdValue(1) / SurdValue(0)


def test_surd_log_of_tiny_value():
    v = SurdValue(Fraction(1, 10**400), Fraction(1, 10**401), 2)
    assert v.to_log().log == pytest.approx(-400 * math.log(10) + math.log1p(math.sqrt(2) / 10), rel=1e-12)


def test_gauss_surd_units():
    assert GaussSurd.unit(0).to_complex(1.0) == 1
    assert GaussSurd.unit(1).to_complex(1.0) == 1j
    assert GaussSurd.unit(2).to_complex(1.0) == -1
    assert GaussSurd.unit(3).to_complex(1.0) == -1j


def test_times_linear_with_surd_part():
    # (sqrt2 x + 1)^2 = 2x^2 + 2 sqrt2 x + 1
    p = RingPoly.one(True)
    for _ in range(2):
        p = times_linear(p, (0, 0, 1, 0), (1, 0, 0, 0), 2, 5)
    assert [tuple(int(c) for c in p.coeff(k)) for k in range(3)] == [(1, 0, 0, 0), (0, 0, 2, 0), (2, 0, 0, 0)]


def test_times_linear_truncates_and_matches_numpy():
    # (1 + i x)^3 (2 - x) truncated at degree 2
    p = RingPoly.one(False)
    for _ in range(3):
        p = times_linear(p, (0, 1, 0, 0), (1, 0, 0, 0), 1, 2)
    p = times_linear(p, (-1, 0, 0, 0), (2, 0, 0, 0), 1, 2)
    import numpy as np
    ref = np.polynomial.polynomial.polymul(np.polynomial.polynomial.polypow([1, 1j], 3), [2, -1])
    got = [complex(*(int(x) for x in p.coeff(k)[:2])) for k in range(3)]
    assert got == [complex(c) for c in ref[:3]]
