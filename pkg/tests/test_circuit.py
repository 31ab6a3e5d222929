import json
import math
from fractions import Fraction

import numpy as np
import pytest

from noon_forge.circuit import (DETECTOR_SETS, CircuitConfig, Detector, detector_coefficients,
                                exact_coefficients, find_set, format_angle, parse_angle, quarter_turns,
                                standard_config)

HALF_PI = math.pi / 2


def close(a, b, tol=1e-15):
    return abs(complex(a) - complex(b)) <= tol


def test_detector_one_at_theta_half_pi():
    c = detector_coefficients(CircuitConfig(3, 3))
    assert close(c["1"][0], -0.5) and close(c["1"][1], -0.5)


def test_detector_nine_at_xi_minus_half_pi():
    t = Fraction(9, 25)
    c = detector_coefficients(CircuitConfig(3, 3, xi=-HALF_PI, zeta=0.3, transmission=t))
    sr = math.sqrt(1 - 9 / 25)
    assert close(c["9"][0], -0.5j * sr) and close(c["9"][1], -0.5j * sr)


def test_u_v_at_zeta_half_pi():
    c = detector_coefficients(CircuitConfig(2, 2, zeta=HALF_PI, transmission=Fraction(36, 100)))
    assert close(c.u, 0.6j - 1, 1e-15)
    assert close(c.v, 0.6 - 1j, 1e-15)


def test_detector_nine_dark_at_full_transmission():
    c = detector_coefficients(CircuitConfig(4, 4, xi=0.4, transmission=1))
    assert c["9"] == (0, 0)


def test_coefficient_table_matches_closed_forms_generic_angles():
    th, xi, ze, t = 0.37, -1.2, 2.1, 0.63
    c = detector_coefficients(CircuitConfig(2, 2, theta=th, xi=xi, zeta=ze, transmission=t))
    ie = 1j * np.exp(1j * xi)
    st, sr = math.sqrt(t), math.sqrt(1 - t)
    u = st * np.exp(1j * ze) - 1
    v = -1j * (st * np.exp(1j * ze) + 1)
    k = 1 / (2 * math.sqrt(2))
    want = {
        "1": (0.5j * np.exp(1j * th), -0.5),
        "2": (-0.5 * np.exp(1j * th), 0.5j),
        "5": (0.5j * ie, 0.5j),
        "5'": (-0.5 * st * np.exp(1j * ze) * ie, -0.5 * st * np.exp(1j * ze)),
        "6": (0.5 * ie, -0.5),
        "7": (k * u * np.exp(1j * xi), k * v),
        "8": (k * v * np.exp(1j * xi), -k * u),
        "9": (-0.5j * sr * ie, -0.5j * sr),
    }
    for d, (a, b) in want.items():
        assert close(c[d][0], a, 1e-15) and close(c[d][1], b, 1e-15), d


@pytest.mark.parametrize("label", ["56", "5p69", "789"])
def test_complete_sets_are_isometries(label):
    cfg = CircuitConfig(3, 4, theta=0.9, xi=-0.4, zeta=1.7, transmission=0.41)
    M = detector_coefficients(cfg).matrix(DETECTOR_SETS[label])
    assert np.allclose(M.conj().T @ M, np.eye(2), atol=1e-15)


def test_probe_set_is_isometry():
    cfg = standard_config(3, 3, 2, 1).replace(probe_phase=0.77)
    M = detector_coefficients(cfg).matrix(DETECTOR_SETS["probe"])
    assert np.allclose(M.conj().T @ M, np.eye(2), atol=1e-15)


def test_exact_table_agrees_with_float_table():
    for xi in (-HALF_PI, 0.0, HALF_PI, math.pi):
        for ze in (0.0, HALF_PI, -HALF_PI):
            cfg = CircuitConfig(2, 3, theta=HALF_PI, xi=xi, zeta=ze, transmission=Fraction(2, 7),
                                probe_phase=HALF_PI, probe_arm=8)
            ex = exact_coefficients(cfg)
            from noon_forge.circuit import _float_table
            fl, _, _ = _float_table(cfg)
            for d in fl:
                a, b = ex.to_float(d)
                assert close(a, fl[d][0], 1e-14) and close(b, fl[d][1], 1e-14)


def test_exact_table_needs_quarter_turns():
    assert exact_coefficients(CircuitConfig(1, 1, xi=0.3)) is None
    assert exact_coefficients(CircuitConfig(1, 1, xi=-HALF_PI)) is not None


def test_standard_config_branches():
    a = standard_config(35, 35, 22, 8)
    assert a.xi == -HALF_PI and a.transmission == Fraction(8, 22)
    assert a.theta == HALF_PI and a.zeta == HALF_PI
    b = standard_config(35, 35, 8, 22)
    assert b.xi == HALF_PI and b.transmission == Fraction(8, 22)
    assert standard_config(30, 30, 15, 15).transmission == 1


def test_swap_flips_only_xi():
    for m1, m2 in [(7, 3), (1, 9), (4, 4)]:
        a, b = standard_config(10, 10, m1, m2), standard_config(10, 10, m2, m1)
        assert a.transmission == b.transmission
        assert a.theta == b.theta and a.zeta == b.zeta
        if m1 != m2:
            assert a.xi == -b.xi


def test_config_validation():
    with pytest.raises(ValueError):
        CircuitConfig(-1, 2)
    with pytest.raises(ValueError):
        CircuitConfig(1, 2, transmission=1.5)
    with pytest.raises(ValueError):
        CircuitConfig(1, 2, probe_arm=5)
    assert CircuitConfig(1, 2, transmission=Fraction(1, 3)).reflection == Fraction(2, 3)


def test_json_round_trip():
    cfg = CircuitConfig(5, 6, theta="pi/2", xi="-pi/2", zeta=0.25, transmission=Fraction(3, 8), probe_phase=0.1)
    doc = json.loads(cfg.to_json())
    assert doc["xi"] == "-pi/2" and doc["transmission"] == "3/8"
    assert CircuitConfig.from_json(cfg.to_json()) == cfg


def test_angle_parsing():
    assert parse_angle("pi/2") == HALF_PI
    assert parse_angle("-pi/2") == -HALF_PI
    assert parse_angle("3*pi/4") == pytest.approx(3 * math.pi / 4)
    assert parse_angle("pi") == math.pi
    assert parse_angle("0.5") == 0.5
    assert format_angle(-HALF_PI) == "-pi/2"
    assert format_angle(0.3) == 0.3
    assert quarter_turns(2 * math.pi + 1e-13) == 0
    assert quarter_turns(0.1) is None


def test_detector_names():
    assert Detector.parse("m5p") == Detector.D5P
    assert Detector.parse("5'") == Detector.D5P
    assert Detector.parse("e7") == Detector.E7
    with pytest.raises(ValueError):
        Detector.parse("3")
    assert find_set(["1", "2", "7", "8", "9"]) == "789"
    with pytest.raises(ValueError):
        find_set(["1", "2", "5", "8"])
