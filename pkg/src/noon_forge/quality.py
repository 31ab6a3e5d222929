"""NOON quality factors of an output count distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engines import OutcomeDistribution


def _probs(dist) -> np.ndarray:
    if isinstance(dist, OutcomeDistribution):
        return dist.probabilities
    p = np.asarray(dist, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a 1-d probability table")
    return p


def variance(dist) -> float:
    p = _probs(dist)
    k = np.arange(p.size)
    mu = np.dot(k, p)
    return float(np.dot((k - mu) ** 2, p))


def q1(dist) -> float:
    """Twice the probability of zero counts on the free detector (not clamped)."""
    return float(2 * _probs(dist)[0])


def q2(dist) -> float:
    """4 Var / m78^2, with m78 the largest free count in the table."""
    p = _probs(dist)
    m78 = p.size - 1
    if m78 == 0:
        raise ValueError("q2 is undefined when no particles reach the output")
    return 4 * variance(p) / m78 ** 2


@dataclass(frozen=True)
class QualityReport:
    q1: float
    q2: float
    m78: int
    variance: float

    def to_dict(self) -> dict:
        return {"q1": self.q1, "q2": self.q2, "m78": self.m78, "variance": self.variance}


def report(dist) -> QualityReport:
    p = _probs(dist)
    return QualityReport(q1(p), q2(p), p.size - 1, variance(p))


def exact_moments(values):
    """(total, mean, variance) of an unnormalized table in its own number field.

    Works for Fractions and SurdValues, so identities can be checked exactly.
    """
    values = list(values)
    tot = values[0] * 0
    s1 = tot
    s2 = tot
    for k, v in enumerate(values):
        tot = tot + v
        s1 = s1 + v * k
        s2 = s2 + v * (k * k)
    mean = s1 / tot
    return tot, mean, s2 / tot - mean * mean
