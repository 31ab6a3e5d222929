from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noon_forge.exact import SurdValue
from noon_forge.quality import exact_moments, q1, q2, report, variance


def test_perfect_noon():
    p = np.zeros(11)
    p[0] = p[-1] = 0.5
    assert q1(p) == 1.0 and q2(p) == 1.0


def test_two_point_unit_spread_exact():
    for m78 in (2, 6, 10, 40):
        p = np.zeros(m78 + 1)
        p[m78 // 2 - 1] = p[m78 // 2 + 1] = 0.5
        assert q2(p) == pytest.approx(4 / m78 ** 2, rel=1e-14)
        assert q1(p) == (1.0 if m78 == 2 else 0.0)


def test_uniform_tends_to_one_third():
    m78 = 2000
    assert q2(np.full(m78 + 1, 1 / (m78 + 1))) == pytest.approx(1 / 3, abs=1e-3)


def test_q1_not_clamped():
    assert q1([0.8, 0.2]) == pytest.approx(1.6)


def test_q2_undefined_without_particles():
    with pytest.raises(ValueError):
        q2([1.0])
    with pytest.raises(ValueError):
        q1([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=30).filter(lambda v: sum(v) > 1e-3))
def test_reflection_invariance_and_range(v):
    p = np.array(v) / sum(v)
    assert q2(p) == pytest.approx(q2(p[::-1]), abs=1e-12)
    assert -1e-12 <= q2(p) <= 1 + 1e-12


def test_report_fields():
    r = report([0.25, 0.5, 0.25])
    assert r.m78 == 2 and r.variance == pytest.approx(0.5) and r.q2 == pytest.approx(0.5)
    assert r.to_dict()["q1"] == pytest.approx(0.5)
    assert variance([0, 1, 0]) == 0


def test_exact_moments_rational_and_surd():
    tot, mean, var = exact_moments([Fraction(1), Fraction(0), Fraction(1)])
    assert (tot, mean, var) == (2, 1, 1)
    s = SurdValue(Fraction(1), Fraction(1), 2)
    tot, mean, var = exact_moments([s, s])
    assert mean == SurdValue(Fraction(1, 2)) and var == SurdValue(Fraction(1, 4))
