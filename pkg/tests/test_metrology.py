import math
from fractions import Fraction

import numpy as np
import pytest

from noon_forge.circuit import CircuitConfig, Detector, standard_config
from noon_forge.engines import conditional_distribution
from noon_forge.metrology import (EstimationRun, bayesian_estimate, classical_fisher, classical_fisher_state,
                                  conditional_state, dual_fock_distribution, expected_gamma, fisher_report,
                                  fringe_distribution, fringe_fixture, minimal_fraction, noon_state, path_symmetry,
                                  path_symmetry_check, prior_grid, probe_distribution, probe_matrix,
                                  quantum_fisher, resource_tradeoff, strict_local_maxima, update_posterior)
from noon_forge.oracle import oracle_table
from noon_forge.quality import q2


def test_probe_matrix_unitary():
    for n in (1, 4, 9):
        M = probe_matrix(n)
        assert np.allclose(M.conj().T @ M, np.eye(n + 1), atol=1e-13)


def test_noon_quantum_fisher():
    for n in (2, 4, 10):
        assert quantum_fisher(np.abs(noon_state(n)) ** 2) == pytest.approx(n * n)


def test_dual_fock_quality():
    for n in (2, 4, 8, 20):
        assert q2(dual_fock_distribution(n)) == pytest.approx(0.5 + 1 / n, abs=1e-12)
    with pytest.raises(ValueError):
        dual_fock_distribution(3)


def test_noon_classical_fisher_saturates_off_degeneracy():
    n = 4
    psi = noon_state(n)
    r = classical_fisher_state(psi, math.pi / (2 * n))
    assert r.value == pytest.approx(16, rel=1e-6) and r.richardson_ok and not r.degenerate
    assert classical_fisher_state(psi, 0.0).degenerate


def test_classical_below_quantum_on_conditional_states():
    for m1, m2, m9 in ((4, 2, 3), (5, 1, 2)):
        cfg = standard_config(8, 8, m1, m2)
        for chi in (0.2, 0.7, 1.3):
            rep = fisher_report(cfg.replace(probe_phase=chi), {"1": m1, "2": m2, "9": m9})
            assert rep.I_cl <= rep.I_qu * (1 + 1e-6)


def test_classical_fisher_requires_probe_phase():
    with pytest.raises(ValueError):
        classical_fisher(standard_config(4, 4, 2, 1), {"1": 2, "2": 1, "9": 1})


def test_probe_stage_matches_engine_and_oracle():
    cfg = standard_config(3, 3, 2, 1).replace(probe_phase=0.37)
    cond = {Detector.D1: 2, Detector.D2: 1, Detector.D9: 1}
    psi = conditional_state(cfg, cond)
    mine = probe_distribution(psi, 0.37)
    eng = conditional_distribution(cfg, cond, Detector.E7, "float").probabilities
    assert np.max(np.abs(mine - eng)) < 1e-12
    ref = oracle_table(cfg, "probe")
    rows = np.array([ref.get((2, 1, 1, k, 2 - k), 0.0) for k in range(3)])
    assert np.max(np.abs(mine - rows / rows.sum())) < 1e-12


def test_path_symmetry_standard_configs():
    for Na, m1, m2, m9 in ((10, 6, 2, 3), (10, 2, 6, 3), (12, 8, 3, 2)):
        cfg = standard_config(Na, Na, m1, m2)
        psi = conditional_state(cfg, {"1": m1, "2": m2, "9": m9})
        g, r = path_symmetry(psi)
        assert r < 1e-10
        want = expected_gamma(2 * Na - m1 - m2 - m9, m2, m9)
        assert abs(math.remainder(g - want, 2 * math.pi)) < 1e-9


def test_path_symmetry_broken_by_zeta():
    cfg = standard_config(10, 10, 6, 2).replace(zeta=math.pi / 3)
    assert path_symmetry_check(cfg, {"1": 6, "2": 2, "9": 3})[1] > 1e-3


def test_path_symmetry_vacuous_without_output():
    cfg = standard_config(3, 3, 4, 2)
    assert path_symmetry_check(cfg, {"1": 4, "2": 2, "9": 0}) == (0.0, 0.0)


def test_no_detections_leave_prior():
    run = EstimationRun(0.3, t=0, nu=1, seed=1, prior=("local", 0.2), grid_points=64)
    res = bayesian_estimate(run, noon_state(4))
    _, prior = prior_grid(run)
    assert np.array_equal(res.last_posterior, prior)


def test_global_prior_periodic_posterior():
    n = 4
    run = EstimationRun(0.3, t=10, nu=1, seed=5, prior=("global",), grid_points=1024)
    res = bayesian_estimate(run, noon_state(n))
    shift = 1024 // n
    assert np.allclose(res.last_posterior, np.roll(res.last_posterior, shift), atol=1e-12)


def test_posterior_independent_of_order():
    grid = np.linspace(0, 1, 50)
    like = probe_distribution(noon_state(4), grid)
    prior = np.full(50, 1 / 50)
    ks = [0, 4, 4, 1, 0, 3, 4]
    a, _ = update_posterior(prior, like, ks)
    b, _ = update_posterior(prior, like, ks[::-1])
    assert np.allclose(a, b, atol=1e-14)


def test_estimation_deterministic_and_near_bound():
    n = 4
    chi = math.pi / (2 * n)
    run = EstimationRun(chi, t=50, nu=60, seed=3, prior=("local", 0.9 * chi))
    a = bayesian_estimate(run, noon_state(n))
    b = bayesian_estimate(run, noon_state(n))
    assert a.to_json() == b.to_json()
    assert 0.6 < a.rms_error / a.cramer_rao_bound < 1.5


def test_resource_tradeoff():
    ok, margin = resource_tradeoff(1.0, 1.0)
    assert ok and margin == pytest.approx(math.sqrt(2) - 1)
    assert resource_tradeoff(44 / 60, 0.96)[0]
    assert not resource_tradeoff(0.5, 0.9)[0]
    assert minimal_fraction(1.0) == pytest.approx(1 / math.sqrt(2))


def test_fringe_engine_matches_fixture():
    for args in ((6, 6, 2, 2), (10, 10, 5, 3), (20, 20, 4, 4)):
        d = fringe_distribution(*args)
        assert d.notes["fixture_max_dev"] < 1e-10


def test_fringe_small_case_against_oracle():
    d = fringe_distribution(1, 1, 0, 0, engine="exact")
    ref = oracle_table(CircuitConfig(1, 1, theta=math.pi / 2, xi=0.0, zeta=0.0, transmission=Fraction(1)), "789")
    rows = np.array([ref.get((0, 0, k, 2 - k, 0), 0.0) for k in range(3)])
    assert np.allclose(d.probabilities, rows / rows.sum(), atol=1e-12)
    assert sum(fringe_fixture(1, 1, 0, 0)) == 1


def test_strict_local_maxima():
    assert strict_local_maxima([0, 1, 0, 2, 2, 0, 3, 0]) == 2
    assert strict_local_maxima([1, 2]) == 0
