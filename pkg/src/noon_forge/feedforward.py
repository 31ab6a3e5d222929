"""Feedforward rule for the D9 splitter: T from the side counts and the m9 statistics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .circuit import HALF_PI, CircuitConfig, Detector, standard_config
from .engines import OutcomeDistribution, conditional_distribution
from .exact import SurdValue
from .numerics import as_rational
from .phase import exact_transmission


def round_half_up(x) -> int:
    return math.floor(as_rational(x) + Fraction(1, 2))


def expected_m9(N: int, m1: int, m2: int) -> Fraction:
    """Closed-form mean |m1 - m2| / (m1 + m2) * (N - m1 - m2)."""
    if m1 + m2 == 0:
        raise ValueError("no side counts")
    return Fraction(abs(m1 - m2) * (N - m1 - m2), m1 + m2)


@dataclass(frozen=True)
class FeedforwardPlan:
    N: int
    m1: int
    m2: int
    transmission: Fraction
    xi: float
    branch: str
    expected_m9: Fraction
    most_probable_m9: int
    m9_source: str = "closed-form"

    @property
    def xi_sign(self) -> int:
        return -1 if self.xi < 0 else 1

    def config(self, N_alpha: Optional[int] = None, N_beta: Optional[int] = None) -> CircuitConfig:
        if N_alpha is None:
            N_alpha = self.N // 2
        if N_beta is None:
            N_beta = self.N - N_alpha
        return CircuitConfig(N_alpha, N_beta, theta=HALF_PI, xi=self.xi, zeta=HALF_PI,
                             transmission=self.transmission)

    def to_dict(self) -> dict:
        t, e = self.transmission, self.expected_m9
        return {
            "N": self.N, "m1": self.m1, "m2": self.m2,
            "T": f"{t.numerator}/{t.denominator}",
            "xi": "-pi/2" if self.xi < 0 else "pi/2",
            "branch": self.branch,
            "expected_m9": f"{e.numerator}/{e.denominator}",
            "most_probable_m9": self.most_probable_m9,
            "m9_source": self.m9_source,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def plan(N: int, m1: int, m2: int, refine: bool = False, N_alpha: Optional[int] = None,
         engine: str = "float") -> FeedforwardPlan:
    """T = smaller/larger side count, xi on the matching branch.

    With ``refine`` the most probable m9 is the rounded mean of the exact
    m9 distribution at this T instead of the rounded closed form.
    """
    if m1 < 0 or m2 < 0 or m1 + m2 > N:
        raise ValueError("need 0 <= m1, m2 and m1 + m2 <= N")
    if m1 + m2 == 0:
        raise ValueError("m1 = m2 = 0 carries no side information; T cannot be set")
    if m1 >= m2:
        t, xi, branch = Fraction(m2, m1), -HALF_PI, "m1>=m2"
    else:
        t, xi, branch = Fraction(m1, m2), HALF_PI, "swapped"
    e9 = expected_m9(N, m1, m2)
    best, source = round_half_up(e9), "closed-form"
    if refine:
        Na = N // 2 if N_alpha is None else N_alpha
        dist = exact_m9_distribution(Na, N - Na, m1, m2, t, engine=engine)
        best, source = round_half_up(Fraction(dist.mean())), "exact-mean"
    return FeedforwardPlan(N, m1, m2, t, xi, branch, e9, best, source)


def cell_config(N_alpha: int, N_beta: int, m1: int, m2: int) -> CircuitConfig:
    """Per-cell corrected config; the (0, 0) cell leaves the splitter transparent."""
    if m1 == 0 and m2 == 0:
        return standard_config(N_alpha, N_beta, 0, 0, Fraction(1))
    p = plan(N_alpha + N_beta, m1, m2)
    return p.config(N_alpha, N_beta)


def gamma_form_m9(N_half: int, m1: int, m2: int, transmission) -> np.ndarray:
    """Normalized P(m9 | m1, m2) for equal sources from the closed Gamma form.

    Works on the m1 >= m2 branch; the other branch is its mirror image.
    """
    if m2 > m1:
        m1, m2 = m2, m1
    t = float(transmission)
    rest = 2 * N_half - m1 - m2
    if rest < 0:
        raise ValueError("side counts exceed N")
    lt = math.log(t) if t > 0 else -math.inf
    lr = math.log(1 - t) if t < 1 else -math.inf
    logs = np.full(rest + 1, -np.inf)
    for m9 in range(rest + 1):
        left = rest - m9
        m5 = np.arange(left + 1)
        m6 = left - m5
        keep = (m2 + m6) % 2 == 0
        if t == 0:
            keep &= m5 == 0
        if not keep.any():
            continue
        m5, m6 = m5[keep], m6[keep]
        with np.errstate(invalid="ignore"):
            tpow = np.where(m5 > 0, m5 * lt, 0.0)
        terms = (tpow - gammaln(m5 + 1) - gammaln(m6 + 1)
                 + 2 * (gammaln((1 + m1 + m5 + m9) / 2) + gammaln((1 + m2 + m6) / 2)))
        l9 = (m9 * lr if m9 else 0.0) - gammaln(m9 + 1)
        logs[m9] = np.logaddexp.reduce(terms) + l9
    top = logs.max()
    p = np.exp(logs - top)
    return p / p.sum()


def exact_m9_distribution(N_alpha: int, N_beta: int, m1: int, m2: int, transmission,
                          engine: str = "float", xi: Optional[float] = None) -> OutcomeDistribution:
    """P(m9 | m1, m2) by summing the engine's joint table over (m5', m6).

    For equal sources the closed Gamma form is evaluated alongside and the
    largest deviation is stored in ``notes["gamma_form_max_dev"]``.
    """
    cfg = standard_config(N_alpha, N_beta, m1, m2, transmission)
    if xi is not None:
        cfg = cfg.replace(xi=xi)
    rest = N_alpha + N_beta - m1 - m2
    if rest < 0:
        raise ValueError("side counts exceed N")
    totals = []
    exact = []
    for m9 in range(rest + 1):
        d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9},
                                     Detector.D5P, engine, allow_zero=True)
        if engine == "exact":
            exact.append(d.exact_total)
        totals.append(d.total)
    dist = OutcomeDistribution({"m1": m1, "m2": m2, "T": str(as_rational(transmission))}, "9",
                               np.array(totals), engine, None, tuple(exact) if exact else None)
    if N_alpha == N_beta and dist.total > 0:
        ref = gamma_form_m9(N_alpha, m1, m2, transmission)
        dist.notes["gamma_form_max_dev"] = float(np.max(np.abs(ref - dist.probabilities)))
    return dist


def exact_m9_mean(N_alpha: int, N_beta: int, m1: int, m2: int, transmission, engine: str = "float") -> float:
    return exact_m9_distribution(N_alpha, N_beta, m1, m2, transmission, engine).mean()


@dataclass(frozen=True)
class MeanRelations:
    mean_m5: object
    mean_m6: object
    mean_m9: object
    transmission: Fraction
    remaining: int
    m9_relation_residual: object      # <m9> - (1-T)(N - m1 - m2 - <m6>)
    conservation_residual: object     # <m5> + <m6> - (N - m1 - m2)
    ratio: float                      # <m5>/<m6>
    ratio_plain: float                # m1/m2
    ratio_refined: float              # (m1 + 1/2)/(m2 + 1/2)


def mean_relations_report(N_alpha: int, N_beta: int, m1: int, m2: int, transmission,
                          engine: str = "exact") -> MeanRelations:
    """Means of m5 = m5' + m9, m6 and m9 over the joint table given (m1, m2).

    With the exact engine the residuals are exact rationals.
    """
    t = as_rational(transmission)
    cfg = standard_config(N_alpha, N_beta, m1, m2, t)
    rest = N_alpha + N_beta - m1 - m2
    zero = SurdValue(0) if engine == "exact" else 0.0
    tot, s5, s6, s9 = zero, zero, zero, zero
    for m9 in range(rest + 1):
        d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9},
                                     Detector.D5P, engine, allow_zero=True)
        vals = d.exact if engine == "exact" else list(d.absolute)
        n = rest - m9
        for k, v in enumerate(vals):
            tot = tot + v
            s5 = s5 + v * (k + m9)
            s6 = s6 + v * (n - k)
            s9 = s9 + v * m9
    e5, e6, e9 = s5 / tot, s6 / tot, s9 / tot
    return MeanRelations(
        e5, e6, e9, t, rest,
        e9 - (1 - t) * (rest - e6),
        e5 + e6 - rest,
        float(e5) / float(e6) if float(e6) else math.inf,
        m1 / m2 if m2 else math.inf,
        (m1 + 0.5) / (m2 + 0.5),
    )


def m9_envelope(N: int, step: int = 1, bound: float = 1.0, engine: str = "float") -> list:
    """|exact <m9> - closed form| over cells with 0 < m1 + m2 <= N/2, equal sources.

    Returns (m1, m2, deviation) for every cell whose deviation exceeds ``bound``.
    """
    if N % 2:
        raise ValueError("equal sources need even N")
    out = []
    for m1 in range(0, N // 2 + 1, step):
        for m2 in range(0, N // 2 - m1 + 1, step):
            if m1 + m2 == 0:
                continue
            hi, lo = max(m1, m2), min(m1, m2)
            t = Fraction(lo, hi)
            gf = gamma_form_m9(N // 2, m1, m2, t)
            mean = float(np.dot(np.arange(gf.size), gf))
            dev = abs(mean - float(expected_m9(N, m1, m2)))
            if dev > bound:
                out.append((m1, m2, dev))
    return out
