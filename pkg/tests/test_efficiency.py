import math

import numpy as np
import pytest

from noon_forge.efficiency import (THREADS_ENV, averaged_corrected, averaged_uncorrected, corrected_slice,
                                   corrected_sweep, corrected_total, m9_match_locus, middle_count, minn_table,
                                   parallel_map, quality_table, resolve_threads, selective_acceptance,
                                   uncorrected_config, uncorrected_sweep)
from noon_forge.oracle import oracle_table


@pytest.fixture(scope="module")
def sweep_60_20():
    return uncorrected_sweep(60, 20)


def test_middle_rows_above_090(sweep_60_20, capsys):
    count, near = middle_count(sweep_60_20.rows, 0.90)
    assert count == 5
    assert sorted(r.m1 for r in near) == [17, 23]
    assert all(round(r.q1, 2) == 0.90 for r in near)
    # with the boundary rows counted at two decimals the band is seven wide
    assert sum(1 for r in sweep_60_20.rows if round(r.q1, 2) >= 0.90) == 7
    assert middle_count(sweep_60_20.rows, 0.95)[0] == 3


def test_m56_30_single_row_reaches_095():
    rows = uncorrected_sweep(60, 30).rows
    assert [r.m1 for r in rows if round(r.q1, 2) >= 0.95] == [15]


def test_boundary_m56_equals_n():
    rep = uncorrected_sweep(12, 12)
    assert len(rep.rows) == 1 and rep.rows[0].m1 == 0
    assert rep.averaged.probabilities.sum() == pytest.approx(1.0)


def test_small_case_against_oracle():
    ref = oracle_table(uncorrected_config(2, 2), "56")
    rep = uncorrected_sweep(4, 2, engine="exact")
    for r in rep.rows:
        want = math.fsum(p for (m1, m2, m5, m6), p in ref.items() if m1 == r.m1 and m2 == r.m2)
        assert r.probability == pytest.approx(want, abs=1e-12)


def test_empty_uncorrected_average():
    with pytest.raises(ValueError):
        averaged_uncorrected(10, 0)
    with pytest.raises(ValueError):
        uncorrected_sweep(10, 11)


def test_acceptance_monotone_and_full_at_zero_threshold():
    tab = minn_table(20, thresholds=(0.0, 0.9), n_mins=(1, 10, 15))
    assert tab[(0.0, 1)] >= tab[(0.0, 10)] >= tab[(0.0, 15)]
    assert tab[(0.9, 1)] <= tab[(0.0, 1)]
    assert selective_acceptance(20, 0.9, 10) == pytest.approx(tab[(0.9, 10)])


def test_corrected_full_output_has_no_cells():
    with pytest.raises(ValueError):
        averaged_corrected(10, 10)


def test_m9_locus():
    loc = m9_match_locus(60, 20)
    assert {(10, 20), (20, 10)} <= loc
    assert loc == {(b, a) for a, b in loc}


def test_slice_cusp_at_equal_counts():
    rows = corrected_slice(60, 20, 10)
    by_m2 = {r.m2: r for r in rows}
    assert by_m2[10].probability == 0 and math.isnan(by_m2[10].q1)
    q = np.array([r.q1 for r in rows])
    left, right = q[:10], q[11:]
    assert 0 < int(np.argmax(left)) < 9 and 0 < int(np.argmax(right)) < len(right) - 1


def test_corrected_total_exact_is_one():
    assert corrected_total(12, engine="exact") == 1
    assert corrected_total(12) == pytest.approx(1.0, abs=1e-13)


def test_corrected_sweeps_sum_below_one():
    tot = math.fsum(corrected_sweep(16, m78).total for m78 in range(16))
    assert tot <= 1 + 1e-12
    assert corrected_sweep(16, 4, include_empty_cell=True).total >= corrected_sweep(16, 4).total


def test_csv_and_json():
    rep = corrected_sweep(10, 4)
    assert rep.to_csv().splitlines()[0] == "m1,m2,m9,q1,q2,probability"
    assert '"mode": "corrected"' in rep.to_json()


def test_quality_table_small():
    rows = quality_table(20, rows=((6, 2), (4, 4)))
    assert rows[0].transmission == pytest.approx(1 / 3) and rows[1].transmission == 1
    assert all(0 <= r.q2 <= 1 for r in rows)


def test_parallel_map_preserves_order():
    assert parallel_map(abs, list(range(-20, 0)), threads=4) == list(range(20, 0, -1))


def test_thread_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
