"""Phase estimation with the output state: Fisher information, path symmetry,
Bayesian estimation, fringes and the dual-Fock comparison.

The estimation stage puts a phase chi on one output arm and recombines the
arms on a 50-50 splitter, e7 = (P7 a7 + i P8 a8)/sqrt2, e8 = (i P7 a7 + P8 a8)/sqrt2
with P the arm phase factors.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Sequence

import numpy as np

from .circuit import HALF_PI, CircuitConfig, Detector
from .engines import OutcomeDistribution, amplitude_sum, conditional_distribution, DetectionOutcome
from .numerics import exact_factorial
from .quality import q2 as quality_q2, variance

FD_STEP = 1e-5
RICHARDSON_RTOL = 1e-4
PROB_FLOOR = 1e-15


# ---------------------------------------------------------------------------
# two-mode probe stage

@lru_cache(maxsize=64)
def probe_matrix(n: int) -> np.ndarray:
    """M[k, j]: amplitude for (e7, e8) = (k, n-k) from (7, 8) = (j, n-j), no phase.

    Built from the exact Gaussian-integer expansion of
    (a7 + i a8)^k (i a7 + a8)^(n-k).
    """
    M = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        # polynomial in x = a7 with Gaussian-integer coefficients (re, im)
        re = [1] + [0] * n
        im = [0] * (n + 1)
        for factor in [(1, 1j)] * k + [(1j, 1)] * (n - k):
            a7c, a8c = factor
            nre, nim = [0] * (n + 1), [0] * (n + 1)
            for d in range(n + 1):
                if re[d] == 0 and im[d] == 0:
                    continue
                for coef, shift in ((a7c, 1), (a8c, 0)):
                    cr, ci = int(coef.real), int(coef.imag)
                    t = d + shift
                    nre[t] += re[d] * cr - im[d] * ci
                    nim[t] += re[d] * ci + im[d] * cr
            re, im = nre, nim
        for j in range(n + 1):
            if re[j] == 0 and im[j] == 0:
                continue
            w = math.sqrt(Fraction(exact_factorial(j) * exact_factorial(n - j),
                                   exact_factorial(k) * exact_factorial(n - k) * 2 ** n))
            M[k, j] = complex(re[j] * w, im[j] * w)
    return M


def probe_amplitudes(psi: Sequence[complex], chi: float, arm: int = 7) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n = psi.size - 1
    j = np.arange(n + 1)
    occ = j if arm == 7 else n - j
    return probe_matrix(n) @ (np.exp(1j * chi * occ) * psi)


def probe_distribution(psi: Sequence[complex], chi, arm: int = 7) -> np.ndarray:
    """P(k | chi) for k = e7 count; rows follow chi when chi is an array."""
    chi = np.asarray(chi, dtype=float)
    if chi.ndim == 0:
        return np.abs(probe_amplitudes(psi, float(chi), arm)) ** 2
    psi = np.asarray(psi, dtype=complex)
    n = psi.size - 1
    j = np.arange(n + 1)
    occ = j if arm == 7 else n - j
    phases = np.exp(1j * np.outer(chi, occ)) * psi[None, :]
    return np.abs(phases @ probe_matrix(n).T) ** 2


def noon_state(n: int) -> np.ndarray:
    psi = np.zeros(n + 1, dtype=complex)
    psi[0] += 1 / math.sqrt(2)
    psi[n] += 1 / math.sqrt(2)
    if n == 0:
        psi[0] = 1
    return psi


def dual_fock_distribution(n: int) -> np.ndarray:
    """Output counts of |n/2, n/2> after a 50-50 splitter."""
    if n % 2:
        raise ValueError("dual-Fock input needs even n")
    psi = np.zeros(n + 1, dtype=complex)
    psi[n // 2] = 1
    return probe_distribution(psi, 0.0)


def conditional_state(config: CircuitConfig, conditioning: Mapping, exact: bool = False) -> np.ndarray:
    """Normalized amplitudes over m7 (m8 = rest) given side and D9 counts."""
    fixed = {Detector.parse(d): int(m) for d, m in conditioning.items()}
    base = config.replace(probe_phase=None)
    if exact:
        n = base.N - sum(fixed.values())
        amps = np.array([complex(amplitude_sum(base, DetectionOutcome({**fixed, Detector.D7: k,
                                                                       Detector.D8: n - k})))
                         for k in range(n + 1)])
    else:
        d = conditional_distribution(base, fixed, Detector.D7, "float")
        amps = np.asarray(d.notes["amplitudes"], dtype=complex)
    norm = math.sqrt(float(np.sum(np.abs(amps) ** 2)))
    if norm == 0:
        raise ValueError("conditioning record has zero probability")
    return amps / norm


# ---------------------------------------------------------------------------
# Fisher information

def quantum_fisher(dist) -> float:
    """4 Var(m7)."""
    if isinstance(dist, OutcomeDistribution):
        return 4 * dist.variance()
    return 4 * variance(dist)


@dataclass(frozen=True)
class ClassicalFisher:
    value: float
    half_step_value: float
    degenerate: bool
    richardson_ok: bool


def classical_fisher_state(psi, chi: float, arm: int = 7, h: float = FD_STEP,
                           reference: Optional[float] = None) -> ClassicalFisher:
    """Sum_k (dP_k/dchi)^2 / P_k by central differences; P_k < 1e-15 skipped."""
    def info(step):
        p0 = probe_distribution(psi, chi, arm)
        dp = (probe_distribution(psi, chi + step, arm) - probe_distribution(psi, chi - step, arm)) / (2 * step)
        keep = p0 > PROB_FLOOR
        return float(np.sum(dp[keep] ** 2 / p0[keep]))

    full, half = info(h), info(h / 2)
    ok = abs(full - half) <= RICHARDSON_RTOL * max(abs(half), 1e-12)
    if not ok and max(abs(full), abs(half)) > 1e-8:
        warnings.warn(f"finite-difference Fisher information unstable: {full} vs {half} at chi={chi}")
    scale = reference if reference is not None else max(len(np.asarray(psi)) - 1, 1) ** 2
    return ClassicalFisher(full, half, full < 1e-8 * scale, ok)


def classical_fisher(config: CircuitConfig, conditioning: Mapping) -> ClassicalFisher:
    """I_cl at the config's probe phase for the state left by ``conditioning``."""
    if config.probe_phase is None:
        raise ValueError("classical_fisher needs a config with probe_phase")
    psi = conditional_state(config, conditioning)
    return classical_fisher_state(psi, config.probe_phase, config.probe_arm)


def path_symmetry(psi: Sequence[complex]):
    """Best constant gamma with C[m7] = conj(C[n - m7]) e^{i gamma}, and the worst residual."""
    psi = np.asarray(psi, dtype=complex)
    if psi.size <= 1:
        return 0.0, 0.0
    rev = psi[::-1]
    s = np.sum(psi * rev)
    gamma = float(np.angle(s)) if abs(s) > 0 else 0.0
    resid = float(np.max(np.abs(psi - np.conj(rev) * np.exp(1j * gamma))))
    return gamma, resid


def path_symmetry_check(config: CircuitConfig, conditioning: Mapping):
    fixed = {Detector.parse(d): int(m) for d, m in conditioning.items()}
    if config.N - sum(fixed.values()) == 0:
        return 0.0, 0.0
    return path_symmetry(conditional_state(config, conditioning))


def expected_gamma(m78: int, m2: int, m9: int) -> float:
    """gamma for the standard corrected settings: -(m7+m8) pi/2 + (m2+m9) pi, in (-pi, pi]."""
    g = -m78 * HALF_PI + (m2 + m9) * math.pi
    return math.remainder(g, 2 * math.pi)


@dataclass(frozen=True)
class FisherReport:
    I_cl: float
    I_qu: float
    gamma: float
    max_gamma_residual: float
    chi: float
    degenerate: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fisher_report(config: CircuitConfig, conditioning: Mapping) -> FisherReport:
    psi = conditional_state(config, conditioning)
    p = np.abs(psi) ** 2
    iq = 4 * variance(p)
    chi = config.probe_phase if config.probe_phase is not None else 0.0
    icl = classical_fisher_state(psi, chi, config.probe_arm, reference=iq)
    g, r = path_symmetry(psi)
    return FisherReport(icl.value, iq, g, r, chi, icl.degenerate)


# ---------------------------------------------------------------------------
# Bayesian estimation

@dataclass
class EstimationRun:
    """Settings of a simulated estimation experiment.

    prior: ("local", half_width) around the true phase, ("uniform", lo, hi),
    or ("global",) for the full circle.
    """

    true_chi: float
    t: int
    nu: int
    seed: int
    prior: tuple = ("global",)
    grid_points: int = 2048


@dataclass
class EstimationResult:
    run: EstimationRun
    grid: np.ndarray
    last_posterior: np.ndarray
    estimates: np.ndarray
    rms_error: float
    per_run_rms: float
    cramer_rao_bound: float
    I_cl: float
    I_qu: float
    underflow: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": self.run.seed,
            "true_chi": self.run.true_chi,
            "t": self.run.t,
            "nu": self.run.nu,
            "rms_error": self.rms_error,
            "cramer_rao_bound": self.cramer_rao_bound,
            "I_cl": self.I_cl,
            "I_qu": self.I_qu,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def prior_grid(run: EstimationRun):
    kind = run.prior[0]
    if kind == "local":
        w = float(run.prior[1])
        lo, hi = run.true_chi - w, run.true_chi + w
        grid = np.linspace(lo, hi, run.grid_points)
    elif kind == "uniform":
        grid = np.linspace(float(run.prior[1]), float(run.prior[2]), run.grid_points)
    elif kind == "global":
        grid = -math.pi + 2 * math.pi * np.arange(run.grid_points) / run.grid_points
    else:
        raise ValueError(f"unknown prior {run.prior!r}")
    return grid, np.full(grid.size, 1.0 / grid.size)


def update_posterior(prior: np.ndarray, likelihood_rows: np.ndarray, outcomes: Sequence[int]):
    """Multiply one likelihood row per outcome into the prior, renormalizing each step.

    Returns (posterior, underflow flag).
    """
    post = np.array(prior, dtype=float)
    flagged = False
    for k in outcomes:
        w = post * likelihood_rows[:, k]
        top = w.max()
        if top == 0:
            raise ValueError(f"outcome {k} has zero likelihood on the whole grid")
        if top < 1e-300:
            w = w / top
            flagged = True
        post = w / w.sum()
    return post, flagged


def bayesian_estimate(run: EstimationRun, psi: Sequence[complex], arm: int = 7) -> EstimationResult:
    """Simulate nu independent estimates, each from t detections at run.true_chi."""
    if run.t < 0 or run.nu < 1:
        raise ValueError("need t >= 0 and nu >= 1")
    psi = np.asarray(psi, dtype=complex)
    grid, prior = prior_grid(run)
    like = probe_distribution(psi, grid, arm)
    p_true = probe_distribution(psi, run.true_chi, arm)
    p_true = np.clip(p_true, 0, None)
    p_true = p_true / p_true.sum()
    children = np.random.SeedSequence(run.seed).spawn(run.nu)
    estimates = np.empty(run.nu)
    post = prior
    flagged = False
    for j, ss in enumerate(children):
        rng = np.random.default_rng(ss)
        ks = rng.choice(p_true.size, size=run.t, p=p_true)
        post, f = update_posterior(prior, like, ks)
        flagged |= f
        estimates[j] = float(np.dot(grid, post))
    per_run = float(np.sqrt(np.mean((estimates - run.true_chi) ** 2)))
    icl = classical_fisher_state(psi, run.true_chi, arm).value
    iq = 4 * variance(np.abs(psi) ** 2)
    bound = 1 / math.sqrt(run.nu * max(run.t, 1) * icl) if icl > 0 else math.inf
    return EstimationResult(run, grid, post, estimates, per_run / math.sqrt(run.nu), per_run, bound,
                            icl, iq, flagged)


# ---------------------------------------------------------------------------
# resources

def resource_tradeoff(f: float, q2: float):
    """Does a fraction f of particles at quality q2 beat dual-Fock input?

    Condition 1/(f sqrt(q2)) <= sqrt(2); returns (satisfied, margin).
    """
    if f <= 0 or q2 <= 0:
        return False, -math.inf
    margin = math.sqrt(2) - 1 / (f * math.sqrt(q2))
    return margin >= 0, margin


def minimal_fraction(q2: float) -> float:
    return 1 / math.sqrt(2 * q2)


# ---------------------------------------------------------------------------
# fringes

def fringe_config(N_alpha: int, N_beta: int) -> CircuitConfig:
    return CircuitConfig(N_alpha, N_beta, theta=HALF_PI, xi=0.0, zeta=0.0, transmission=Fraction(1))


def fringe_distribution(N_alpha: int, N_beta: int, m1: int, m2: int, engine: str = "float") -> OutcomeDistribution:
    """m7 distribution of the uncorrected circuit read out through detectors 7 and 8."""
    cfg = fringe_config(N_alpha, N_beta)
    d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: 0}, Detector.D7, engine)
    fx = fringe_fixture(N_alpha, N_beta, m1, m2)
    d.notes["fixture_max_dev"] = float(max(abs(float(a) - b) for a, b in zip(fx, d.probabilities)))
    return d


def fringe_fixture(N_alpha: int, N_beta: int, m1: int, m2: int) -> list:
    """Normalized single-sum expression for the same distribution, in exact rationals."""
    m78 = N_alpha + N_beta - m1 - m2
    if m78 < 0:
        raise ValueError("side counts exceed N")
    F = exact_factorial
    out = []
    for m7 in range(m78 + 1):
        m8 = m78 - m7
        s = Fraction(0)
        for p in range(m1 + 1):
            a = N_alpha - p - m8
            b = m2 + m8 - N_alpha + p
            if a < 0 or b < 0:
                continue
            s += Fraction((-1) ** p, F(p) * F(m1 - p) * F(a) * F(b))
        out.append(s * s / (F(m7) * F(m8)))
    tot = sum(out)
    if tot == 0:
        raise ValueError("fixture distribution vanishes")
    return [x / tot for x in out]


def strict_local_maxima(p: Sequence[float]) -> int:
    p = np.asarray(p, dtype=float)
    if p.size < 3:
        return 0
    return int(np.sum((p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])))
