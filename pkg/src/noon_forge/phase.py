"""Phase-state profiles and the peak conditions behind the feedforward rule."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .numerics import as_rational


def q12(phi, m1: int, m2: int):
    """(cos phi/2)^m1 (sin phi/2)^m2."""
    phi = np.asarray(phi, dtype=float)
    out = np.cos(phi / 2) ** m1 * np.sin(phi / 2) ** m2
    return float(out) if out.ndim == 0 else out


def q129(phi, m1: int, m2: int, m9: int):
    """Side-detection factor of the corrected circuit at xi = -pi/2."""
    return q12(phi, m1 + m9, m2)


def q8(phi, m8: int, transmission):
    """(sqrt(T) cos phi/2 + sin phi/2)^m8, the arm-8 factor at m7 = 0."""
    phi = np.asarray(phi, dtype=float)
    st = math.sqrt(float(transmission))
    out = (st * np.cos(phi / 2) + np.sin(phi / 2)) ** m8
    return float(out) if out.ndim == 0 else out


def peak_phase(m1: int, m2: int) -> float:
    """Positive peak 2*arctan(sqrt(m2/m1)) of q12; pi when m1 = 0."""
    if m1 < 0 or m2 < 0:
        raise ValueError("counts must be nonnegative")
    if m1 == 0:
        if m2 == 0:
            raise ValueError("peak undefined for m1 = m2 = 0")
        return math.pi
    if m1 == m2:
        return math.pi / 2
    return 2 * math.atan(math.sqrt(m2 / m1))


def exact_transmission(N: int, m1: int, m2: int, m9) -> Fraction:
    """T that puts the corrected peak exactly at the side-detection peak."""
    d = m1 - m2 + as_rational(m9)
    den = N + d
    if den <= 0:
        raise ValueError("denominator N + m1 - m2 + m9 must be positive")
    return Fraction(N - d) / den


def cubic_coefficients(m1: int, m2: int, m9: int, m78: int, sqrt_t: float):
    """Coefficients (X^3, X^2, X, 1) of the corrected-peak cubic in X = tan(phi/2)."""
    a = m1 + m9
    return (a, sqrt_t * (a + m78), -(m2 + m78), -m2 * sqrt_t)


def cubic_at_sqrt_t(m1: int, m2: int, m9: int, m78: int, transmission) -> Fraction:
    """Cubic at X = sqrt(T), divided by sqrt(T); exact for rational T.

    With X = s = sqrt(T) every term carries one factor s, leaving
    T (2(m1+m9) + m78) - (2 m2 + m78).
    """
    t = as_rational(transmission)
    return t * (2 * (m1 + m9) + m78) - (2 * m2 + m78)


def _descartes_positive(coeffs) -> int:
    signs = [c for c in coeffs if c != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def corrected_peak(m1: int, m2: int, m9: int, m78: int, transmission) -> float:
    """phi_m = 2 arctan X for the nonnegative root X of the peak cubic.

    For m2 = 0 the root X = 0 is factored out; the remaining quadratic
    root is returned when m78 > 0, and 0 otherwise.
    """
    if m1 + m9 <= 0:
        raise ValueError("corrected_peak needs m1 + m9 > 0")
    t = float(transmission)
    if not 0 <= t <= 1:
        raise ValueError("T must lie in [0, 1]")
    st = math.sqrt(t)
    a, b, c, d = cubic_coefficients(m1, m2, m9, m78, st)
    if m2 == 0:
        if m78 == 0:
            return 0.0
        # X * (a X^2 + b X + c) with c < 0: one positive root
        f = lambda x: (a * x + b) * x + c
    else:
        f = lambda x: ((a * x + b) * x + c) * x + d
        if _descartes_positive((a, b, c, d)) != 1:
            raise ArithmeticError("peak cubic does not have a unique positive root")
    lo, hi = 0.0, 1.0
    if f(lo) > 0:
        raise ArithmeticError("no nonnegative root of the peak cubic")
    while f(hi) <= 0:
        hi *= 2
        if hi > 1e12:
            raise ArithmeticError("no nonnegative root of the peak cubic")
    if f(lo) == 0:
        return 0.0
    x = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return 2 * math.atan(x)


def numeric_argmax(func: Callable[[np.ndarray], np.ndarray], lo: float = 0.0, hi: float = math.pi,
                   points: int = 10_000) -> float:
    """Grid search followed by bounded golden-section refinement."""
    grid = np.linspace(lo, hi, points)
    vals = func(grid)
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, points - 1)]
    if b <= a:
        return float(grid[k])
    res = minimize_scalar(lambda x: -float(func(np.array([x]))[0]), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x) if -res.fun >= vals[k] else float(grid[k])


def corrected_peak_numeric(m1: int, m2: int, m9: int, m78: int, transmission, points: int = 10_000) -> float:
    """Argmax over (0, pi) of q129 * q8, the quantity the cubic extremizes."""
    def f(phi):
        return q129(phi, m1, m2, m9) * q8(phi, m78, transmission)
    return numeric_argmax(f, 0.0, math.pi, points)


def delta_peak_amplitude(m1: int, m2: int, m5: int, m6: int, N_alpha: int, xi: float = 0.0) -> complex:
    """Two-spike approximation of the uncorrected amplitude (diagnostic only).

    q12 is replaced by spikes at +-phi0 of equal weight; the result is the
    sum of the two branch factors without normalization.
    """
    phi0 = peak_phase(m1, m2) if m1 + m2 > 0 else math.pi / 2
    sign = (-1) ** m2
    total = 0j
    for s, w in ((1, 1.0), (-1, sign)):
        phi = s * phi0
        ie = 1j * np.exp(1j * xi)
        f5 = 0.5j * (ie * np.exp(1j * phi) + 1)
        f6 = 0.5 * (ie * np.exp(1j * phi) - 1)
        total += w * np.exp(-1j * N_alpha * phi) * f5 ** m5 * f6 ** m6
    return complex(total)


@dataclass
class PhaseProfile:
    """Sampled real function of phi with the parameters that produced it."""

    phi: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)

    def peaks(self) -> np.ndarray:
        """Angles of strict local maxima of |values|."""
        v = np.abs(self.values)
        idx = np.where((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:]))[0] + 1
        return self.phi[idx]

    def to_csv(self, path: Optional[str] = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi", "value"])
        for p, v in zip(self.phi, self.values):
            w.writerow([repr(float(p)), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def sample_q12(m1: int, m2: int, points: int = 1001) -> PhaseProfile:
    phi = np.linspace(-math.pi, math.pi, points)
    return PhaseProfile(phi, q12(phi, m1, m2), {"m1": m1, "m2": m2})


def sample_corrected(m1: int, m2: int, m9: int, m78: int, transmission, points: int = 1001) -> PhaseProfile:
    """q129 * q8 on [-pi, pi]."""
    phi = np.linspace(-math.pi, math.pi, points)
    vals = q129(phi, m1, m2, m9) * q8(phi, m78, transmission)
    return PhaseProfile(phi, vals, {"m1": m1, "m2": m2, "m9": m9, "m8": m78,
                                    "sqrt_T": math.sqrt(float(transmission))})
