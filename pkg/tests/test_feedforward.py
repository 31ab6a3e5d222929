import json
import math
from fractions import Fraction

import numpy as np
import pytest

from noon_forge.circuit import standard_config
from noon_forge.exact import SurdValue
from noon_forge.feedforward import (cell_config, exact_m9_distribution, exact_m9_mean, expected_m9,
                                    gamma_form_m9, m9_envelope, mean_relations_report, plan, round_half_up)
from noon_forge.phase import exact_transmission


def test_plan_table_rows():
    p = plan(140, 40, 10)
    assert p.transmission == Fraction(1, 4) and p.expected_m9 == 54 and p.most_probable_m9 == 54
    assert p.xi == -math.pi / 2 and p.branch == "m1>=m2"
    q = plan(140, 25, 25)
    assert q.transmission == 1 and q.expected_m9 == 0


def test_plan_peak_case():
    p = plan(70, 22, 8)
    assert p.transmission == Fraction(4, 11)
    assert p.expected_m9 == Fraction(56, 3)
    assert p.most_probable_m9 == 19 and p.m9_source == "closed-form"
    r = plan(70, 22, 8, refine=True)
    assert r.most_probable_m9 == 18 and r.m9_source == "exact-mean"
    assert exact_transmission(70, 22, 8, 18) == Fraction(19, 51)


def test_exact_mean_peak_case():
    assert exact_m9_mean(35, 35, 22, 8, Fraction(4, 11)) == pytest.approx(18.47, abs=0.01)


def test_plan_swapped_branch():
    p = plan(70, 8, 22)
    assert p.transmission == Fraction(4, 11) and p.xi == math.pi / 2 and p.branch == "swapped"
    assert p.xi_sign == 1 and plan(70, 22, 8).xi_sign == -1
    assert p.config().xi == standard_config(35, 35, 8, 22).xi


def test_plan_errors():
    with pytest.raises(ValueError):
        plan(10, 0, 0)
    with pytest.raises(ValueError):
        plan(10, 6, 5)
    with pytest.raises(ValueError):
        expected_m9(10, 0, 0)


def test_plan_depends_only_on_ratio():
    for k in range(1, 8):
        assert plan(140, 3 * k, k).transmission == plan(60, 12, 4).transmission


def test_expected_m9_range():
    for N in (20, 60):
        for m1 in range(N + 1):
            for m2 in range(N - m1 + 1):
                if m1 + m2:
                    assert 0 <= expected_m9(N, m1, m2) <= N - m1 - m2


def test_closed_form_substitution_gives_ratio():
    for N in (30, 70, 140):
        for m1 in range(1, N + 1, 3):
            for m2 in range(0, min(m1, N - m1) + 1, 2):
                assert exact_transmission(N, m1, m2, expected_m9(N, m1, m2)) == Fraction(m2, m1)


def test_round_half_up():
    assert round_half_up(Fraction(5, 2)) == 3
    assert round_half_up(Fraction(56, 3)) == 19
    assert round_half_up(18.47) == 18


def test_plan_json():
    doc = json.loads(plan(70, 22, 8).to_json())
    assert doc["T"] == "4/11" and doc["xi"] == "-pi/2" and doc["expected_m9"] == "56/3"


def test_cell_config_empty_cell():
    assert cell_config(5, 5, 0, 0).transmission == 1
    assert cell_config(5, 5, 4, 2).transmission == Fraction(1, 2)


def test_appendix_b_mean():
    d = exact_m9_distribution(70, 70, 40, 10, Fraction(1, 4), engine="exact")
    assert d.mean() == pytest.approx(53.6, abs=0.05)
    assert d.notes["gamma_form_max_dev"] < 1e-13
    assert round_half_up(expected_m9(140, 40, 10)) == 54


def test_gamma_form_matches_engine():
    for args in [(10, 6, 3, Fraction(1, 2)), (15, 4, 9, Fraction(4, 9)), (20, 12, 0, Fraction(0))]:
        Na, m1, m2, t = args
        d = exact_m9_distribution(Na, Na, m1, m2, t, xi=-math.pi / 2 if m1 >= m2 else math.pi / 2)
        assert np.max(np.abs(gamma_form_m9(Na, m1, m2, t) - d.probabilities)) < 1e-12


def test_m9_distribution_full_transmission():
    d = exact_m9_distribution(6, 6, 3, 3, Fraction(1), engine="exact")
    assert d.probabilities[0] == 1 and np.all(d.probabilities[1:] == 0)


def test_m9_distribution_unequal_sources():
    d = exact_m9_distribution(7, 4, 3, 1, Fraction(1, 3))
    assert "gamma_form_max_dev" not in d.notes
    assert d.probabilities.sum() == pytest.approx(1.0, abs=1e-14)


def test_mean_relations_exact():
    rep = mean_relations_report(30, 30, 18, 12, Fraction(2, 3))
    assert rep.m9_relation_residual == SurdValue(0)
    assert rep.conservation_residual == SurdValue(0)
    assert abs(rep.ratio - rep.ratio_refined) < 0.01
    assert abs(rep.ratio - rep.ratio_refined) < abs(rep.ratio - rep.ratio_plain)
    rep2 = mean_relations_report(8, 12, 5, 2, Fraction(2, 5))
    assert rep2.m9_relation_residual == SurdValue(0)
    assert rep2.conservation_residual == SurdValue(0)


def test_m9_envelope_logged(capsys):
    # deviations beyond 1.0 are reported, not failed; they sit at the small-count edge
    viol = m9_envelope(60)
    with capsys.disabled():
        worst = max(viol, key=lambda r: r[2]) if viol else None
        print(f"\n<m9> envelope N=60: {len(viol)} cells beyond 1.0, worst {worst}")
    assert all(min(m1, m2) <= 3 for m1, m2, _ in viol)
    assert (40, 10) not in {(a, b) for a, b, _ in m9_envelope(140, step=5)}
