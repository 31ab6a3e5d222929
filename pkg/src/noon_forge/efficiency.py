"""Sweeps over side-detection records: how often, and how well, NOON states come out.

Uncorrected circuit: detectors {1, 2, 5, 6} with xi = 0.  Corrected
circuit: detectors {1, 2, 7, 8, 9} with T and xi set per (m1, m2) cell by
the feedforward plan.  Sources are split evenly unless stated otherwise.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .circuit import CircuitConfig, Detector
from .engines import OutcomeDistribution, conditional_distribution
from .feedforward import cell_config, expected_m9, plan, round_half_up
from .quality import QualityReport, report

THREADS_ENV = "NOON_FORGE_THREADS"
TABLE_THRESHOLDS = (0.90, 0.95)
TABLE_NMIN = (35, 30, 20, 15)


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def parallel_map(func: Callable, items: list, threads: Optional[int] = None) -> list:
    """Ordered map; results come back in input order whatever the worker count."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) < 2 * threads:
        return [func(x) for x in items]
    chunk = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items, chunksize=chunk))


def _split(N: int, N_alpha: Optional[int]):
    Na = N // 2 if N_alpha is None else N_alpha
    return Na, N - Na


@dataclass
class CellRow:
    m1: int
    m2: int
    m9: Optional[int]
    q1: float
    q2: float
    probability: float


@dataclass
class EfficiencyReport:
    rows: list
    averaged: Optional[OutcomeDistribution]
    quality: Optional[QualityReport]
    total: float
    params: dict = field(default_factory=dict)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m1", "m2", "m9", "q1", "q2", "probability"])
        for r in self.rows:
            w.writerow([r.m1, r.m2, "" if r.m9 is None else r.m9, repr(r.q1), repr(r.q2), repr(r.probability)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "total_probability": self.total,
            "quality": None if self.quality is None else self.quality.to_dict(),
            "averaged": None if self.averaged is None else [float(p) for p in self.averaged.probabilities],
            "rows": [r.__dict__ for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _quality_or_nan(absolute: np.ndarray):
    tot = math.fsum(absolute)
    if tot <= 0:
        return math.nan, math.nan
    p = absolute / tot
    q1 = 2 * p[0]
    if p.size == 1:
        return q1, math.nan
    k = np.arange(p.size)
    mu = np.dot(k, p)
    return q1, 4 * float(np.dot((k - mu) ** 2, p)) / (p.size - 1) ** 2


# ---------------------------------------------------------------------------
# uncorrected circuit

def uncorrected_config(N_alpha: int, N_beta: int) -> CircuitConfig:
    return CircuitConfig(N_alpha, N_beta, xi=0.0)


def _uncorrected_cell(args):
    Na, Nb, m1, m2, engine = args
    d = conditional_distribution(uncorrected_config(Na, Nb), {Detector.D1: m1, Detector.D2: m2},
                                 Detector.D5, engine, allow_zero=True)
    return d.absolute


def uncorrected_sweep(N: int, m56: int, N_alpha: Optional[int] = None, engine: str = "float",
                      threads: Optional[int] = None) -> EfficiencyReport:
    """q1, q2 and absolute probability for every m1 at fixed m5 + m6."""
    if not 0 <= m56 <= N:
        raise ValueError("need 0 <= m56 <= N")
    Na, Nb = _split(N, N_alpha)
    side = N - m56
    cells = [(Na, Nb, m1, side - m1, engine) for m1 in range(side + 1)]
    results = parallel_map(_uncorrected_cell, cells, threads)
    rows = []
    for (_, _, m1, m2, _), a in zip(cells, results):
        q1, q2 = _quality_or_nan(a)
        rows.append(CellRow(m1, m2, None, q1, q2, math.fsum(a)))
    stacked = np.array(results)
    absolute = stacked.sum(axis=0)
    total = math.fsum(r.probability for r in rows)
    averaged = quality = None
    if total > 0 and m56 > 0:
        averaged = OutcomeDistribution({"N": N, "m56": m56}, "5", absolute, engine, "6")
        quality = report(averaged)
    return EfficiencyReport(rows, averaged, quality, total, {"N": N, "m56": m56, "mode": "uncorrected"})


def averaged_uncorrected(N: int, m56: int, N_alpha: Optional[int] = None, engine: str = "float",
                         threads: Optional[int] = None):
    """Probability-weighted average of the m5 distributions at fixed m56."""
    if m56 <= 0:
        raise ValueError("empty distribution: no particles reach detectors 5 and 6")
    rep = uncorrected_sweep(N, m56, N_alpha, engine, threads)
    if rep.averaged is None:
        raise ValueError("empty distribution")
    return rep.averaged, rep.quality, rep.total


def middle_count(rows: Iterable[CellRow], threshold: float, flag_band: float = 0.005):
    """Number of rows with q1 > threshold, and rows within flag_band of it."""
    rows = list(rows)
    count = sum(1 for r in rows if r.q1 > threshold)
    near = [r for r in rows if abs(r.q1 - threshold) <= flag_band]
    return count, near


def _passes(q1: float, threshold: float, decimals: Optional[int]) -> bool:
    if math.isnan(q1):
        return False
    if decimals is None:
        return q1 >= threshold
    return round(q1, decimals) >= threshold - 1e-12


def selective_acceptance(N: int, q1_threshold: float, N_min: int, decimals: Optional[int] = 2,
                         N_alpha: Optional[int] = None, engine: str = "float",
                         threads: Optional[int] = None) -> float:
    """Percent probability of records with m56 >= N_min and q1 at or above threshold.

    q1 is compared after rounding to ``decimals`` places (None compares raw).
    """
    table = minn_table(N, (q1_threshold,), (N_min,), decimals, N_alpha, engine, threads)
    return table[(q1_threshold, N_min)]


def minn_table(N: int, thresholds=TABLE_THRESHOLDS, n_mins=TABLE_NMIN, decimals: Optional[int] = 2,
               N_alpha: Optional[int] = None, engine: str = "float", threads: Optional[int] = None) -> dict:
    """{(threshold, N_min): percent} from one pass over all cells."""
    Na, Nb = _split(N, N_alpha)
    lo = min(n_mins)
    cells = [(Na, Nb, m1, N - m56 - m1, engine) for m56 in range(max(lo, 1), N + 1)
             for m1 in range(N - m56 + 1)]
    results = parallel_map(_uncorrected_cell, cells, threads)
    out = {}
    for th in thresholds:
        for nm in n_mins:
            parts = []
            for (_, _, m1, m2, _), a in zip(cells, results):
                if N - m1 - m2 < nm:
                    continue
                q1, _ = _quality_or_nan(a)
                if _passes(q1, th, decimals):
                    parts.append(math.fsum(a))
            out[(th, nm)] = 100 * math.fsum(parts)
    return out


# ---------------------------------------------------------------------------
# corrected circuit

def _corrected_cell(args):
    Na, Nb, m1, m2, m9, engine = args
    cfg = cell_config(Na, Nb, m1, m2)
    d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9},
                                 Detector.D7, engine, allow_zero=True)
    return d.absolute


def corrected_sweep(N: int, m78: int, N_alpha: Optional[int] = None, engine: str = "float",
                    threads: Optional[int] = None, include_empty_cell: bool = False) -> EfficiencyReport:
    """Every (m1, m2) cell at fixed m78, each with its own feedforward config.

    The (0, 0) cell has no plan; it is skipped unless ``include_empty_cell``,
    in which case the splitter is left transparent (T = 1).
    """
    if not 0 <= m78 <= N:
        raise ValueError("need 0 <= m78 <= N")
    Na, Nb = _split(N, N_alpha)
    side = N - m78
    cells = []
    for m1 in range(side + 1):
        for m2 in range(side - m1 + 1):
            if m1 == 0 and m2 == 0 and not include_empty_cell:
                continue
            cells.append((Na, Nb, m1, m2, side - m1 - m2, engine))
    if not cells:
        raise ValueError("empty: no (m1, m2) cell admits a feedforward plan")
    results = parallel_map(_corrected_cell, cells, threads)
    rows = []
    for (_, _, m1, m2, m9, _), a in zip(cells, results):
        q1, q2 = _quality_or_nan(a)
        rows.append(CellRow(m1, m2, m9, q1, q2, math.fsum(a)))
    absolute = np.array(results).sum(axis=0)
    total = math.fsum(r.probability for r in rows)
    averaged = quality = None
    if total > 0:
        averaged = OutcomeDistribution({"N": N, "m78": m78}, "7", absolute, engine, "8")
        if m78 > 0:
            quality = report(averaged)
    return EfficiencyReport(rows, averaged, quality, total, {"N": N, "m78": m78, "mode": "corrected"})


def averaged_corrected(N: int, m78: int, N_alpha: Optional[int] = None, engine: str = "float",
                       threads: Optional[int] = None):
    """Probability-weighted average of the m7 distributions at fixed m78."""
    rep = corrected_sweep(N, m78, N_alpha, engine, threads)
    if rep.averaged is None or rep.quality is None:
        raise ValueError("empty averaged distribution")
    return rep.averaged, rep.quality, rep.total


def corrected_slice(N: int, m78: int, m1: int, N_alpha: Optional[int] = None, engine: str = "float") -> list:
    """Rows over m2 at fixed m1 and m78."""
    rep = corrected_sweep(N, m78, N_alpha, engine, threads=1)
    return [r for r in rep.rows if r.m1 == m1]


def corrected_total(N: int, N_alpha: Optional[int] = None, engine: str = "float"):
    """Sum of the corrected joint probability over every record.

    Each (m1, m2) cell uses its own T, the (0, 0) cell T = 1.  Per cell the
    sum over (m9, m7) is T-independent and rational, so exact totals are
    collected as Fractions.
    """
    Na, Nb = _split(N, N_alpha)
    exact = engine == "exact"
    acc = Fraction(0) if exact else []
    for m1 in range(N + 1):
        for m2 in range(N - m1 + 1):
            cfg = cell_config(Na, Nb, m1, m2)
            cell = None
            for m9 in range(N - m1 - m2 + 1):
                d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9},
                                             Detector.D7, engine, allow_zero=True)
                if exact:
                    cell = d.exact_total if cell is None else cell + d.exact_total
                else:
                    acc.append(d.total)
            if exact:
                if cell.surd != 0:
                    raise ArithmeticError(f"cell ({m1}, {m2}) total is not rational")
                acc += cell.rat
    return acc if exact else math.fsum(acc)


def m9_match_locus(N: int, m78: int) -> set:
    """Cells where the rounded closed-form mean of m9 equals the m9 they imply."""
    out = set()
    side = N - m78
    for m1 in range(side + 1):
        for m2 in range(side - m1 + 1):
            if m1 == 0 and m2 == 0:
                continue
            if round_half_up(expected_m9(N, m1, m2)) == side - m1 - m2:
                out.add((m1, m2))
    return out


# ---------------------------------------------------------------------------
# quality table

QUALITY_TABLE_ROWS = ((45, 5), (40, 10), (35, 15), (30, 20), (25, 25))


@dataclass
class QualityRow:
    m1: int
    m2: int
    m78: int
    m9: int
    transmission: Fraction
    q1: float
    q2: float
    distribution: OutcomeDistribution = field(repr=False, default=None)

    def to_dict(self) -> dict:
        t = self.transmission
        return {"m1": self.m1, "m2": self.m2, "m78": self.m78, "m9": self.m9,
                "T": f"{t.numerator}/{t.denominator}", "T_float": float(t), "q1": self.q1, "q2": self.q2}


def _quality_row(args):
    N, m1, m2, engine = args
    p = plan(N, m1, m2)
    m9 = p.most_probable_m9
    cfg = p.config()
    d = conditional_distribution(cfg, {Detector.D1: m1, Detector.D2: m2, Detector.D9: m9}, Detector.D7, engine)
    r = report(d)
    return QualityRow(m1, m2, N - m1 - m2 - m9, m9, p.transmission, r.q1, r.q2, d)


def quality_table(N: int, rows=QUALITY_TABLE_ROWS, engine: str = "float", threads: Optional[int] = None) -> list:
    """Per (m1, m2): feedforward T, rounded closed-form m9, and q1, q2 of the m7 distribution."""
    return parallel_map(_quality_row, [(N, m1, m2, engine) for m1, m2 in rows], threads)
