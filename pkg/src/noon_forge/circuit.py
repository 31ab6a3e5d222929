"""Interferometer description and detector coefficient tables.

Each detector operator is a linear combination c_alpha * a_alpha + c_beta * a_beta
of the two source modes.  The tables are produced in floating point and,
when every phase is a multiple of pi/2 and T is rational, exactly in
Q(i)[sqrt(T)].
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Union

import numpy as np

from .exact import GaussSurd
from .numerics import as_rational

HALF_PI = math.pi / 2
SNAP_TOL = 1e-12


class Detector(str, Enum):
    D1 = "1"
    D2 = "2"
    D5 = "5"
    D5P = "5'"
    D6 = "6"
    D7 = "7"
    D8 = "8"
    D9 = "9"
    E7 = "e7"
    E8 = "e8"

    @classmethod
    def parse(cls, name) -> "Detector":
        if isinstance(name, Detector):
            return name
        key = str(name).strip().lower().replace("p", "'").replace("′", "'")
        if key.startswith("m"):
            key = key[1:]
        for d in cls:
            if d.value == key:
                return d
        raise ValueError(f"unknown detector {name!r}")

    def __str__(self):
        return self.value


D = Detector

# the complete detector sets, keyed by a short label
DETECTOR_SETS: dict[str, tuple[Detector, ...]] = {
    "56": (D.D1, D.D2, D.D5, D.D6),
    "5p69": (D.D1, D.D2, D.D5P, D.D6, D.D9),
    "789": (D.D1, D.D2, D.D7, D.D8, D.D9),
    "probe": (D.D1, D.D2, D.D9, D.E7, D.E8),
}


def find_set(detectors) -> str:
    """Label of the complete set that contains exactly these detectors."""
    want = frozenset(Detector.parse(d) for d in detectors)
    for label, members in DETECTOR_SETS.items():
        if frozenset(members) == want:
            return label
    raise ValueError(f"{sorted(str(d) for d in want)} is not a complete detector set")


_ANGLE_RE = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(value) -> float:
    """Radians from a number or strings such as "pi/2", "-pi/2", "3*pi/4"."""
    if isinstance(value, (int, float, np.floating, np.integer)):
        return float(value)
    text = str(value).strip().lower()
    m = _ANGLE_RE.match(text)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        mult = float(m.group(2)) if m.group(2) else 1.0
        div = float(m.group(3)) if m.group(3) else 1.0
        return sign * mult * math.pi / div
    return float(text)


def format_angle(x: float) -> Union[str, float]:
    k = quarter_turns(x)
    if k is None:
        return float(x)
    return {0: "0", 1: "pi/2", 2: "pi", 3: "-pi/2"}[k]


def quarter_turns(angle: float) -> Optional[int]:
    """k in 0..3 when angle is within 1e-12 of k*pi/2 (mod 2pi), else None."""
    k = round(angle / HALF_PI)
    if abs(angle - k * HALF_PI) <= SNAP_TOL:
        return k % 4
    return None


@dataclass(frozen=True)
class CircuitConfig:
    """Source numbers and interferometer settings.

    ``transmission`` may be an int, Fraction or float; rational values keep
    the exact engine available.  R = 1 - T is always derived.
    """

    N_alpha: int
    N_beta: int
    theta: float = HALF_PI
    xi: float = 0.0
    zeta: float = 0.0
    transmission: Union[Fraction, float] = Fraction(1)
    probe_phase: Optional[float] = None
    probe_arm: int = 7

    def __post_init__(self):
        if self.N_alpha < 0 or self.N_beta < 0:
            raise ValueError("source numbers must be nonnegative")
        t = self.transmission
        if isinstance(t, (int, np.integer)) and not isinstance(t, bool):
            t = Fraction(int(t))
            object.__setattr__(self, "transmission", t)
        if not 0 <= t <= 1:
            raise ValueError(f"transmission must lie in [0, 1], got {t}")
        if self.probe_arm not in (7, 8):
            raise ValueError("probe_arm must be 7 or 8")
        for name in ("theta", "xi", "zeta"):
            object.__setattr__(self, name, parse_angle(getattr(self, name)))
        if self.probe_phase is not None:
            object.__setattr__(self, "probe_phase", parse_angle(self.probe_phase))

    @property
    def N(self) -> int:
        return self.N_alpha + self.N_beta

    @property
    def reflection(self):
        return 1 - self.transmission

    def replace(self, **changes) -> "CircuitConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        t = self.transmission
        return {
            "N_alpha": self.N_alpha,
            "N_beta": self.N_beta,
            "theta": format_angle(self.theta),
            "xi": format_angle(self.xi),
            "zeta": format_angle(self.zeta),
            "transmission": f"{t.numerator}/{t.denominator}" if isinstance(t, Fraction) else float(t),
            "probe_phase": None if self.probe_phase is None else format_angle(self.probe_phase),
            "probe_arm": self.probe_arm,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CircuitConfig":
        t = doc.get("transmission", 1)
        if isinstance(t, str):
            t = Fraction(t.strip())
        kw = dict(
            N_alpha=int(doc["N_alpha"]),
            N_beta=int(doc["N_beta"]),
            theta=parse_angle(doc.get("theta", HALF_PI)),
            xi=parse_angle(doc.get("xi", 0.0)),
            zeta=parse_angle(doc.get("zeta", 0.0)),
            transmission=t,
            probe_arm=int(doc.get("probe_arm", 7)),
        )
        if doc.get("probe_phase") is not None:
            kw["probe_phase"] = parse_angle(doc["probe_phase"])
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "CircuitConfig":
        return cls.from_dict(json.loads(text))


def standard_config(N_alpha: int, N_beta: int, m1: int, m2: int, transmission=None) -> CircuitConfig:
    """Corrected-circuit settings: theta = zeta = pi/2, xi = -/+ pi/2 by branch.

    T defaults to the feedforward rule (smaller side count over larger).
    """
    if m1 < 0 or m2 < 0:
        raise ValueError("side counts must be nonnegative")
    xi = -HALF_PI if m1 >= m2 else HALF_PI
    if transmission is None:
        hi, lo = max(m1, m2), min(m1, m2)
        transmission = Fraction(lo, hi) if hi > 0 else Fraction(1)
    return CircuitConfig(N_alpha, N_beta, theta=HALF_PI, xi=xi, zeta=HALF_PI,
                         transmission=transmission)


# ---------------------------------------------------------------------------
# coefficient tables

@dataclass(frozen=True)
class ModeCoefficients:
    """Float coefficient pairs (c_alpha, c_beta) for every detector."""

    pairs: Mapping[Detector, tuple[complex, complex]]
    u: complex
    v: complex

    def __getitem__(self, d) -> tuple[complex, complex]:
        return self.pairs[Detector.parse(d)]

    def matrix(self, detectors) -> np.ndarray:
        return np.array([self[d] for d in detectors], dtype=complex)


@dataclass(frozen=True)
class ExactEntry:
    """c = sqrt(scale_sq) * (alpha, beta) with alpha, beta in Q(i)[s], s = sqrt(T)."""

    scale_sq: Fraction
    alpha: GaussSurd
    beta: GaussSurd


@dataclass(frozen=True)
class ExactCoefficients:
    transmission: Fraction
    entries: Mapping[Detector, ExactEntry]

    def __getitem__(self, d) -> ExactEntry:
        return self.entries[Detector.parse(d)]

    def to_float(self, d) -> tuple[complex, complex]:
        e = self[d]
        k = math.sqrt(e.scale_sq)
        s = math.sqrt(self.transmission)
        return (k * e.alpha.to_complex(s), k * e.beta.to_complex(s))


def _probe_factors(config: CircuitConfig):
    chi = config.probe_phase
    if chi is None:
        return None
    if config.probe_arm == 7:
        return chi, 0.0
    return 0.0, chi


def exact_coefficients(config: CircuitConfig) -> Optional[ExactCoefficients]:
    """Exact table when all phases are quarter turns and T is rational."""
    angles = [config.theta, config.xi, config.zeta]
    probe = _probe_factors(config)
    if probe is not None:
        angles += list(probe)
    turns = [quarter_turns(a) for a in angles]
    if any(k is None for k in turns):
        return None
    t = as_rational(config.transmission)
    r = 1 - t
    E = GaussSurd.unit
    one = GaussSurd(Fraction(1))
    i_ = E(1)
    half = Fraction(1, 2)
    s = GaussSurd(0, 0, Fraction(1), 0)
    eth, exi, ezeta = E(turns[0]), E(turns[1]), E(turns[2])

    def m(a, b):
        return a.mul(b, t)

    u = m(s, ezeta) - one
    v = m(-i_, m(s, ezeta) + one)
    ent = {
        D.D1: ExactEntry(Fraction(1), m(i_, eth).scale(half), (-one).scale(half)),
        D.D2: ExactEntry(Fraction(1), (-eth).scale(half), i_.scale(half)),
        D.D5: ExactEntry(Fraction(1), (-exi).scale(half), i_.scale(half)),
        # sqrt(T) and sqrt(R) go into the scale so the remaining parts stay rational
        D.D5P: ExactEntry(t, m(m(-ezeta, i_), exi).scale(half), (-ezeta).scale(half)),
        D.D6: ExactEntry(Fraction(1), m(i_, exi).scale(half), (-one).scale(half)),
        D.D7: ExactEntry(Fraction(1, 8), m(u, exi), v),
        D.D8: ExactEntry(Fraction(1, 8), m(v, exi), -u),
        D.D9: ExactEntry(r, exi.scale(half), (-i_).scale(half)),
    }
    if probe is not None:
        p7, p8 = E(turns[3]), E(turns[4])
        a7, b7 = m(u, exi), v
        a8, b8 = m(v, exi), -u
        ent[D.D7] = ExactEntry(Fraction(1, 8), m(p7, a7), m(p7, b7))
        ent[D.D8] = ExactEntry(Fraction(1, 8), m(p8, a8), m(p8, b8))
        # e7 = (P7 a7 + i P8 a8)/sqrt2, e8 = (i P7 a7 + P8 a8)/sqrt2
        ent[D.E7] = ExactEntry(Fraction(1, 16), m(p7, a7) + m(i_, m(p8, a8)), m(p7, b7) + m(i_, m(p8, b8)))
        ent[D.E8] = ExactEntry(Fraction(1, 16), m(i_, m(p7, a7)) + m(p8, a8), m(i_, m(p7, b7)) + m(p8, b8))
    return ExactCoefficients(t, ent)


def _float_table(config: CircuitConfig) -> dict:
    t = float(config.transmission)
    st = math.sqrt(t)
    sr = math.sqrt(max(0.0, 1.0 - t))
    eth = np.exp(1j * config.theta)
    exi = np.exp(1j * config.xi)
    ez = np.exp(1j * config.zeta)
    ie = 1j * exi
    u = st * ez - 1
    v = -1j * (st * ez + 1)
    k = 1 / (2 * math.sqrt(2))
    tab = {
        D.D1: (0.5j * eth, -0.5),
        D.D2: (-0.5 * eth, 0.5j),
        D.D5: (0.5j * ie, 0.5j),
        D.D5P: (-0.5 * st * ez * ie, -0.5 * st * ez),
        D.D6: (0.5 * ie, -0.5),
        D.D7: (k * u * exi, k * v),
        D.D8: (k * v * exi, -k * u),
        D.D9: (-0.5j * sr * ie, -0.5j * sr),
    }
    probe = _probe_factors(config)
    if probe is not None:
        p7, p8 = np.exp(1j * probe[0]), np.exp(1j * probe[1])
        c7 = tuple(p7 * c for c in tab[D.D7])
        c8 = tuple(p8 * c for c in tab[D.D8])
        tab[D.D7], tab[D.D8] = c7, c8
        w = 1 / math.sqrt(2)
        tab[D.E7] = tuple(w * (c7[j] + 1j * c8[j]) for j in range(2))
        tab[D.E8] = tuple(w * (1j * c7[j] + c8[j]) for j in range(2))
    return tab, u, v


def detector_coefficients(config: CircuitConfig) -> ModeCoefficients:
    """Float coefficient table; exact-valued entries are rounded from the exact table."""
    tab, u, v = _float_table(config)
    ex = exact_coefficients(config)
    if ex is not None:
        tab = {d: ex.to_float(d) for d in ex.entries}
        st = math.sqrt(ex.transmission)
        ez = complex(GaussSurd.unit(quarter_turns(config.zeta)).to_complex(0.0))
        u = st * ez - 1
        v = -1j * (st * ez + 1)
    tab = {d: (complex(a), complex(b)) for d, (a, b) in tab.items()}
    return ModeCoefficients(tab, complex(u), complex(v))
