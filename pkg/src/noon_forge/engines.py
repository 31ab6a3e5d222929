"""Joint detection amplitudes and conditional distributions.

Three routes to the same numbers:

* ``amplitude_sum``: the multinomial coefficient sum, done in exact
  arithmetic (Gaussian integers, optionally with a sqrt(D) part) by
  multiplying out linear factors and reading off one coefficient.
* ``amplitude_integral``: the phase-integral form on a 4(N+1)-point grid,
  with log-magnitude accumulation.  ``precision="auto"`` re-evaluates
  ill-conditioned cases with gmpy2 at increasing precision.
* ``statevector_oracle`` (see ``oracle.py``): brute-force Fock evolution.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional

import gmpy2
import numpy as np
from scipy.special import gammaln

from .circuit import (DETECTOR_SETS, CircuitConfig, Detector, detector_coefficients,
                      exact_coefficients, find_set)
from .exact import (RingPoly, SurdValue, abs2, reversed_window, ring_dot, split_surd,
                    times_linear)
from .numerics import exact_factorial, quadrature_grid

ENGINES = ("exact", "float", "integral")
FLUSH_BELOW = 1e-300
EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# outcomes

@dataclass(frozen=True)
class DetectionOutcome:
    """Particle counts on one complete detector set."""

    counts: Mapping[Detector, int]

    def __post_init__(self):
        counts = {Detector.parse(d): int(m) for d, m in dict(self.counts).items()}
        if any(m < 0 for m in counts.values()):
            raise ValueError("detector counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "label", find_set(counts.keys()))

    @classmethod
    def of(cls, **kw) -> "DetectionOutcome":
        """DetectionOutcome.of(m1=.., m2=.., m5p=..) style constructor."""
        return cls({Detector.parse(k): v for k, v in kw.items()})

    def __getitem__(self, d) -> int:
        return self.counts[Detector.parse(d)]

    def get(self, d, default=0) -> int:
        return self.counts.get(Detector.parse(d), default)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def M(self) -> int:
        return self.get("1") + self.get("2")

    @property
    def script_M(self) -> int:
        return self.M + self.get("9")

    @property
    def m78(self) -> int:
        return self.get("7") + self.get("8")

    @property
    def m56(self) -> int:
        return self.total - self.M

    def key(self) -> tuple:
        return tuple(self.counts[d] for d in DETECTOR_SETS[self.label])


def _check(config: CircuitConfig, outcome: DetectionOutcome):
    if outcome.total != config.N:
        raise ValueError(f"outcome holds {outcome.total} particles but the sources hold {config.N}")
    if outcome.label == "probe" and config.probe_phase is None:
        raise ValueError("probe-stage outcome needs a config with probe_phase set")


# ---------------------------------------------------------------------------
# exact ring preparation

@dataclass(frozen=True)
class _RingFactor:
    alpha: tuple
    beta: tuple
    scale_sq: Fraction   # |c|^2 scale per factor; c = sqrt(scale_sq) * (alpha, beta)
    zero: bool


@dataclass(frozen=True)
class _RingTable:
    factors: Mapping[Detector, _RingFactor]
    radicand: int
    surd: bool
    exact_config: bool


def _lcm_den(values) -> int:
    out = 1
    for v in values:
        out = out * v.denominator // math.gcd(out, v.denominator)
    return out


@lru_cache(maxsize=256)
def _ring_table(config: CircuitConfig) -> _RingTable:
    ex = exact_coefficients(config)
    factors = {}
    if ex is not None:
        scale_s, d = split_surd(ex.transmission)
        for det, e in ex.entries.items():
            a, b, k2 = e.alpha, e.beta, e.scale_sq
            if not (a.has_rational() or b.has_rational()) and (a.has_surd() or b.has_surd()):
                # purely sqrt(T) valued: move sqrt(T) into the scale
                a, b, k2 = a.drop_surd(), b.drop_surd(), k2 * ex.transmission
            parts = []
            for x in (a, b):
                re, im = x.re, x.im
                sre, sim = x.sre * scale_s, x.sim * scale_s
                if d == 1:
                    re, im, sre, sim = re + sre, im + sim, Fraction(0), Fraction(0)
                parts.append((re, im, sre, sim))
            flat = parts[0] + parts[1]
            L = _lcm_den(flat)
            ints = [int(v * L) for v in flat]
            zero = all(v == 0 for v in ints) or k2 == 0
            factors[det] = _RingFactor(tuple(ints[:4]), tuple(ints[4:]), k2 / (L * L), zero)
        surd = d != 1 and any(f.alpha[2:] != (0, 0) or f.beta[2:] != (0, 0) for f in factors.values())
        return _RingTable(factors, d if surd else 1, surd, True)
    coef = detector_coefficients(config)
    for det, (ca, cb) in coef.pairs.items():
        flat = [Fraction(ca.real), Fraction(ca.imag), Fraction(cb.real), Fraction(cb.imag)]
        L = _lcm_den(flat)
        ints = [int(v * L) for v in flat]
        zero = all(v == 0 for v in ints)
        factors[det] = _RingFactor((ints[0], ints[1], 0, 0), (ints[2], ints[3], 0, 0),
                                   Fraction(1, L * L), zero)
    return _RingTable(factors, 1, False, False)


def _factorial_ratio(Na: int, Nb: int, ms: Iterable[int]) -> Fraction:
    den = 1
    for m in ms:
        den *= exact_factorial(m)
    return Fraction(exact_factorial(Na) * exact_factorial(Nb), den)


@dataclass(frozen=True)
class SumAmplitude:
    """Exact amplitude sqrt(scale_sq) * (value), value in Z[i][sqrt(radicand)]."""

    value: tuple
    radicand: int
    scale_sq: Fraction

    def probability(self) -> SurdValue:
        a, b = abs2(self.value, self.radicand)
        return SurdValue(self.scale_sq * a, self.scale_sq * b, self.radicand)

    def to_mpc(self, bits: int = 256):
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            re, im, sre, sim = (gmpy2.mpfr(x) for x in self.value)
            root = gmpy2.sqrt(gmpy2.mpfr(self.radicand))
            k = gmpy2.sqrt(gmpy2.mpfr(gmpy2.mpq(self.scale_sq.numerator, self.scale_sq.denominator)))
            return gmpy2.mpc(k * (re + sre * root), k * (im + sim * root))

    def __complex__(self) -> complex:
        return complex(self.to_mpc())


def amplitude_sum(config: CircuitConfig, outcome: DetectionOutcome) -> SumAmplitude:
    """Exact multinomial-sum amplitude with all prefactors retained."""
    _check(config, outcome)
    tab = _ring_table(config)
    Na = config.N_alpha
    poly = RingPoly.one(tab.surd)
    scale = _factorial_ratio(Na, config.N_beta, outcome.counts.values())
    for det in DETECTOR_SETS[outcome.label]:
        m = outcome.counts[det]
        if m == 0:
            continue
        f = tab.factors[det]
        if f.zero:
            return SumAmplitude((0, 0, 0, 0), tab.radicand, Fraction(0))
        scale *= f.scale_sq ** m
        for _ in range(m):
            poly = times_linear(poly, f.alpha, f.beta, tab.radicand, Na)
    return SumAmplitude(tuple(int(x) for x in poly.coeff(Na)), tab.radicand, scale)


# ---------------------------------------------------------------------------
# integral representation

def _log_factor(ca: complex, cb: complex, z: np.ndarray):
    f = ca * z + cb
    with np.errstate(divide="ignore"):
        return np.log(np.abs(f)), np.angle(f)


def amplitude_integral(config: CircuitConfig, outcome: DetectionOutcome, precision: str = "auto") -> complex:
    """Phase-integral amplitude on the 4(N+1)-point grid.

    precision="double" is the plain float path; "auto" escalates to
    multi-precision when the quadrature sum cancels heavily.
    """
    _check(config, outcome)
    if precision not in ("auto", "double"):
        raise ValueError("precision must be 'auto' or 'double'")
    coef = detector_coefficients(config)
    phi = quadrature_grid(config.N)
    z = np.exp(1j * phi)
    Na, Nb = config.N_alpha, config.N_beta
    logm = np.full(phi.size, 0.5 * (gammaln(Na + 1) + gammaln(Nb + 1)
                                   - sum(gammaln(m + 1) for m in outcome.counts.values())))
    ph = -Na * phi
    for det, m in outcome.counts.items():
        if m == 0:
            continue
        ca, cb = coef[det]
        if ca == 0 and cb == 0:
            return 0j
        lg, ang = _log_factor(ca, cb, z)
        logm = logm + m * lg
        ph = ph + m * ang
    f = np.exp(logm + 1j * ph)
    val = complex(f.mean())
    if precision == "double":
        return val
    mag = float(np.abs(f).mean())
    if not _needs_escalation(val, mag, float(np.max(np.abs(logm[np.isfinite(logm)]), initial=0.0))):
        return val
    return complex(_integral_hp(config, outcome.counts)[0])


# relative amplitude accuracy the auto path guarantees
AUTO_RTOL = 1e-11


def _needs_escalation(val, mag, max_log) -> bool:
    if mag == 0:
        return False
    # each quadrature term carries a relative rounding error of about
    # eps * |log term|; the mean inherits that times mag
    err = 4 * EPS * (4 + max_log) * mag
    return abs(val) == 0 or err > AUTO_RTOL * abs(val)


class _HPCoefficients:
    """Multi-precision coefficient pairs for one config at a fixed precision."""

    def __init__(self, config: CircuitConfig, bits: int):
        self.bits = bits
        ex = exact_coefficients(config)
        self.pairs = {}
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            if ex is not None:
                s = gmpy2.sqrt(_mpq(ex.transmission))
                for det, e in ex.entries.items():
                    k = gmpy2.sqrt(_mpq(e.scale_sq))
                    self.pairs[det] = tuple(
                        gmpy2.mpc(k * (_mpq(x.re) + _mpq(x.sre) * s), k * (_mpq(x.im) + _mpq(x.sim) * s))
                        for x in (e.alpha, e.beta))
            else:
                for det, (ca, cb) in detector_coefficients(config).pairs.items():
                    self.pairs[det] = (gmpy2.mpc(ca), gmpy2.mpc(cb))


def _mpq(x: Fraction):
    return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))


MAX_BITS = 1280


def _integral_hp(config: CircuitConfig, counts: Mapping[Detector, int]):
    """Integral in multi-precision; returns (mpc value, bits used).

    Precision is raised until the cancellation between the quadrature
    terms leaves at least 64 good bits; past MAX_BITS the value is treated
    as zero.
    """
    bits = 128
    Na, Nb = config.N_alpha, config.N_beta
    K = 4 * (config.N + 1)
    while True:
        coef = _HPCoefficients(config, bits)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            pi = gmpy2.const_pi()
            num = gmpy2.mpfr(exact_factorial(Na) * exact_factorial(Nb))
            den = gmpy2.mpfr(math.prod(exact_factorial(m) for m in counts.values()))
            pref = gmpy2.sqrt(num / den)
            total = gmpy2.mpc(0)
            mag = gmpy2.mpfr(0)
            for k in range(K):
                phi = -pi + 2 * pi * k / K
                zk = gmpy2.mpc(gmpy2.cos(phi), gmpy2.sin(phi))
                term = zk ** (-Na) if Na else gmpy2.mpc(1)
                for det, m in counts.items():
                    if m == 0:
                        continue
                    ca, cb = coef.pairs[det]
                    term *= (ca * zk + cb) ** m
                total += term
                mag += abs(term)
            total = pref * total / K
            mag = pref * mag / K
        if mag == 0:
            return gmpy2.mpc(0), bits
        lost = float(gmpy2.log2(mag / abs(total))) if total != 0 else float(bits)
        if bits - lost >= 64:
            return total, bits
        # |total| is at the noise floor: give up once that floor squared is
        # already below the flush threshold
        floor = float(gmpy2.log2(mag)) - (bits - 16)
        if 2 * floor < math.log2(FLUSH_BELOW) - 40 or bits >= MAX_BITS:
            return gmpy2.mpc(0), bits
        if bits - lost > 16:
            new_bits = int(lost) + 96
        else:
            # pure noise: go straight to the precision where a miss means zero
            new_bits = int(float(gmpy2.log2(mag)) - math.log2(FLUSH_BELOW) / 2 + 40)
        bits = min(MAX_BITS, max(new_bits, bits + 64))


# ---------------------------------------------------------------------------
# distributions

@dataclass
class OutcomeDistribution:
    """Probability table over one free detector count.

    ``absolute`` holds the unnormalized joint probabilities; ``total`` their
    sum (the probability of the conditioning record).
    """

    conditioning: dict
    free: str
    absolute: np.ndarray
    engine: str = "float"
    partner: Optional[str] = None
    exact: Optional[tuple] = None
    flushed: bool = False
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.absolute = np.asarray(self.absolute, dtype=float)

    @property
    def n(self) -> int:
        return len(self.absolute) - 1

    @property
    def counts(self) -> np.ndarray:
        return np.arange(len(self.absolute))

    @property
    def total(self) -> float:
        if self.exact is not None:
            return float(self.exact_total)
        return math.fsum(self.absolute)

    @property
    def exact_total(self) -> Optional[SurdValue]:
        if self.exact is None:
            return None
        out = SurdValue(0)
        for v in self.exact:
            out = out + v
        return out

    @property
    def probabilities(self) -> np.ndarray:
        if self.exact is not None:
            tot = self.exact_total
            if tot.is_zero():
                raise ValueError("conditioning record has zero probability")
            return np.array([float(v / tot) for v in self.exact])
        tot = self.total
        if tot <= 0:
            raise ValueError("conditioning record has zero probability")
        return self.absolute / tot

    def exact_probabilities(self) -> list:
        tot = self.exact_total
        return [v / tot for v in self.exact]

    def mean(self) -> float:
        p = self.probabilities
        return float(np.dot(self.counts, p))

    def variance(self) -> float:
        p = self.probabilities
        k = self.counts
        mu = np.dot(k, p)
        return float(np.dot((k - mu) ** 2, p))

    def mode(self) -> int:
        return int(np.argmax(self.absolute))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"m{self.free}", "probability"])
        for k, p in zip(self.counts, self.probabilities):
            w.writerow([int(k), repr(float(p))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self, exact_strings: bool = False) -> dict:
        doc = {
            "conditioning": {str(k): v for k, v in self.conditioning.items()},
            "free": f"m{self.free}",
            "partner": None if self.partner is None else f"m{self.partner}",
            "engine": self.engine,
            "total": self.total,
            "flushed": self.flushed,
            "probability": [float(p) for p in self.probabilities],
        }
        if exact_strings and self.exact is not None:
            doc["exact_probability"] = [_surd_str(v) for v in self.exact_probabilities()]
        if self.notes:
            doc["notes"] = self.notes
        return doc

    def to_json(self, exact_strings: bool = False) -> str:
        return json.dumps(self.to_dict(exact_strings), indent=2)


def _surd_str(v: SurdValue) -> dict:
    out = {"rational": f"{v.rat.numerator}/{v.rat.denominator}"}
    if v.surd != 0:
        out["surd"] = f"{v.surd.numerator}/{v.surd.denominator}"
        out["radicand"] = str(v.radicand)
    return out


def _resolve_pair(fixed: Mapping[Detector, int], free: Detector):
    have = set(fixed) | {free}
    matches = [lab for lab, dets in DETECTOR_SETS.items()
               if have <= set(dets) and len(dets) == len(have) + 1]
    if len(matches) != 1:
        raise ValueError("fixed counts plus the free detector must leave exactly one detector of a complete set")
    lab = matches[0]
    partner = next(d for d in DETECTOR_SETS[lab] if d not in have)
    return lab, partner


def conditional_distribution(config: CircuitConfig, fixed: Mapping, free, engine: str = "float",
                             allow_zero: bool = False) -> OutcomeDistribution:
    """Distribution of the free count given fixed counts on the other detectors.

    The last detector of the set (the partner) takes the remaining particles.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    fixed = {Detector.parse(d): int(m) for d, m in fixed.items()}
    free = Detector.parse(free)
    label, partner = _resolve_pair(fixed, free)
    if label == "probe" and config.probe_phase is None:
        raise ValueError("probe-stage distribution needs probe_phase")
    if any(m < 0 for m in fixed.values()):
        raise ValueError("counts must be nonnegative")
    n = config.N - sum(fixed.values())
    if n < 0:
        raise ValueError(f"fixed counts exceed the {config.N} available particles")
    cond = {f"m{d}": m for d, m in fixed.items()}
    if engine == "exact":
        vals = _exact_batch(config, fixed, free, partner, n)
        dist = OutcomeDistribution(cond, free.value, np.array([float(v) for v in vals]), "exact",
                                   partner.value, tuple(vals))
    else:
        amps, flags = _float_batch(config, fixed, free, partner, n, engine == "integral")
        absolute = np.abs(amps) ** 2
        flushed = bool(np.any((absolute > 0) & (absolute < FLUSH_BELOW))) or flags
        absolute[absolute < FLUSH_BELOW] = 0.0
        dist = OutcomeDistribution(cond, free.value, absolute, engine, partner.value, None, flushed)
        dist.notes["amplitudes"] = amps
    if not allow_zero and dist.total == 0:
        raise ValueError("empty support: the conditioning record has zero probability")
    return dist


def _exact_batch(config, fixed, free, partner, n, tab=None, prefix=None, brev=None):
    tab = tab or _ring_table(config)
    Na, Nb = config.N_alpha, config.N_beta
    d = tab.radicand
    fa, fb = tab.factors[free], tab.factors[partner]
    base = _factorial_ratio(Na, Nb, fixed.values())
    if prefix is None:
        prefix = RingPoly.one(tab.surd)
        for det, m in fixed.items():
            if m == 0:
                continue
            f = tab.factors[det]
            if f.zero:
                return [SurdValue(0, 0, d)] * (n + 1)
            for _ in range(m):
                prefix = times_linear(prefix, f.alpha, f.beta, d, Na)
    for det, m in fixed.items():
        if m:
            base *= tab.factors[det].scale_sq ** m
    if brev is None:
        brev = _partner_windows(tab, partner, n, Na)
    out = []
    h = prefix
    for k in range(n + 1):
        j = n - k
        if (fa.zero and k > 0) or (fb.zero and j > 0):
            out.append(SurdValue(0, 0, d))
        else:
            s = ring_dot(h, brev[j], d)
            a, b = abs2(s, d)
            w = base * fa.scale_sq ** k * fb.scale_sq ** j / (exact_factorial(k) * exact_factorial(j))
            out.append(SurdValue(w * a, w * b, d))
        if k < n:
            h = times_linear(h, fa.alpha, fa.beta, d, Na)
    return out


def _partner_windows(tab, partner, n, Na):
    f = tab.factors[partner]
    d = tab.radicand
    windows = []
    p = RingPoly.one(tab.surd)
    for j in range(n + 1):
        windows.append(reversed_window(p, Na))
        if j < n:
            p = times_linear(p, f.alpha, f.beta, d, Na)
    return windows


def _float_batch(config, fixed, free, partner, n, escalate: bool):
    """Integral-form amplitudes for every split of n between free and partner."""
    coef = detector_coefficients(config)
    Na, Nb = config.N_alpha, config.N_beta
    phi = quadrature_grid(config.N)
    z = np.exp(1j * phi)
    base = 0.5 * (gammaln(Na + 1) + gammaln(Nb + 1) - sum(gammaln(m + 1) for m in fixed.values()))
    logm = np.full(phi.size, base)
    ph = -Na * phi
    for det, m in fixed.items():
        if m == 0:
            continue
        ca, cb = coef[det]
        if ca == 0 and cb == 0:
            return np.zeros(n + 1, dtype=complex), False
        lg, ang = _log_factor(ca, cb, z)
        logm = logm + m * lg
        ph = ph + m * ang
    k = np.arange(n + 1)[:, None]
    j = n - k
    lga, anga = _log_factor(*coef[free], z)
    lgb, angb = _log_factor(*coef[partner], z)
    with np.errstate(invalid="ignore"):
        L = (logm[None, :] + np.where(k > 0, k * lga[None, :], 0.0) + np.where(j > 0, j * lgb[None, :], 0.0)
             - 0.5 * (gammaln(k + 1) + gammaln(j + 1)))
    P = ph[None, :] + k * anga[None, :] + j * angb[None, :]
    L = np.where(np.isnan(L), -np.inf, L)
    f = np.exp(L + 1j * P)
    amps = f.mean(axis=1)
    if not escalate:
        return amps, False
    mags = np.abs(f).mean(axis=1)
    finite = np.where(np.isfinite(L), np.abs(L), 0.0)
    maxlog = finite.max(axis=1)
    for idx in range(n + 1):
        if _needs_escalation(amps[idx], mags[idx], maxlog[idx]):
            counts = dict(fixed)
            counts[free] = idx
            counts[partner] = n - idx
            val, _ = _integral_hp(config, counts)
            amps[idx] = complex(val)
    return amps, False


def probability(config: CircuitConfig, outcome: DetectionOutcome, engine: str = "float") -> float:
    """|C|^2 for a single outcome with the chosen engine."""
    if engine == "exact":
        return float(amplitude_sum(config, outcome).probability())
    prec = "auto" if engine == "integral" else "double"
    p = abs(amplitude_integral(config, outcome, prec)) ** 2
    return p if p >= FLUSH_BELOW else 0.0


def enumerate_set(config: CircuitConfig, label: str, engine: str = "float"):
    """Every conserving outcome of a complete set with its absolute probability.

    Yields (counts tuple in set order, probability) where probability is a
    SurdValue for the exact engine and a float otherwise.
    """
    dets = DETECTOR_SETS[label]
    if label == "probe" and config.probe_phase is None:
        raise ValueError("probe set needs probe_phase")
    *lead, free, partner = dets
    N = config.N
    if engine == "exact":
        tab = _ring_table(config)
        brev = _partner_windows(tab, partner, N, config.N_alpha)
        yield from _enumerate_exact(config, tab, lead, free, partner, brev, {}, RingPoly.one(tab.surd), N)
        return
    for fixed in _compositions(lead, N):
        n = N - sum(fixed.values())
        dist = conditional_distribution(config, fixed, free, engine, allow_zero=True)
        for k, p in enumerate(dist.absolute):
            yield tuple(fixed[d] for d in lead) + (k, n - k), float(p)


def _compositions(dets, N):
    if not dets:
        yield {}
        return
    head, *rest = dets
    for m in range(N + 1):
        for tail in _compositions(rest, N - m):
            yield {head: m, **tail}


def _enumerate_exact(config, tab, lead, free, partner, brev, fixed, prefix, remaining):
    if not lead:
        n = remaining
        vals = _exact_batch(config, fixed, free, partner, n, tab, prefix, brev)
        base = tuple(fixed[d] for d in fixed)
        for k, v in enumerate(vals):
            yield base + (k, n - k), v
        return
    head, *rest = lead
    f = tab.factors[head]
    p = prefix
    for m in range(remaining + 1):
        if m > 0:
            if f.zero:
                p = None
            elif p is not None:
                p = times_linear(p, f.alpha, f.beta, tab.radicand, config.N_alpha)
        if p is None:
            # zero factor: every outcome with this count vanishes
            n_out = remaining - m
            for sub in _zero_tail(rest, n_out):
                yield tuple(fixed.values()) + (m,) + sub, SurdValue(0, 0, tab.radicand)
            continue
        yield from _enumerate_exact(config, tab, rest, free, partner, brev, {**fixed, head: m}, p,
                                    remaining - m)


def _zero_tail(rest, n):
    for comp in _compositions(list(rest), n):
        left = n - sum(comp.values())
        for k in range(left + 1):
            yield tuple(comp.values()) + (k, left - k)
