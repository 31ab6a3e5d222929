"""Brute-force Fock-space simulation of the interferometer.

The state is a dict from occupation tuples to amplitudes.  Every two-mode
element is applied as exp(i G) where G is the single-particle generator
lifted to the fixed-total-number subspace, so the oracle shares no
binomial bookkeeping with the engines.
"""

from __future__ import annotations

import math
from collections import defaultdict
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, logm

from .circuit import CircuitConfig, Detector
from .engines import DetectionOutcome, _check

MAX_N = 12
SQ2 = math.sqrt(2.0)

SOURCE_SPLIT = np.array([[1j, 1], [1, 1j]]) / SQ2
SIDE_SPLIT = np.array([[1, 1j], [1j, 1]]) / SQ2
MIDDLE_SPLIT = np.array([[-1, 1j], [1j, -1]]) / SQ2
FINAL_SPLIT = np.array([[1j, 1j], [1, -1]]) / SQ2
PROBE_SPLIT = np.array([[1, 1j], [1j, 1]]) / SQ2


def _generator(U: np.ndarray) -> np.ndarray:
    H = -1j * logm(U)
    return 0.5 * (H + H.conj().T)


@lru_cache(maxsize=512)
def _lifted(U_key: tuple, n: int) -> np.ndarray:
    """Unitary on span{|k, n-k>} induced by the single-particle U.

    Basis index k = occupation of the first mode.
    """
    U = np.array(U_key).reshape(2, 2)
    H = _generator(U)
    G = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        G[k, k] = H[0, 0] * k + H[1, 1] * (n - k)
        if k < n:
            # a0^dag a1 moves one particle from mode 1 to mode 0
            G[k + 1, k] += H[0, 1] * math.sqrt((k + 1) * (n - k))
            G[k, k + 1] += H[1, 0] * math.sqrt((k + 1) * (n - k))
    return expm(1j * G)


class FockState:
    def __init__(self, modes, amps):
        self.modes = list(modes)
        self.amps = dict(amps)

    def add_vacuum(self, name):
        self.modes.append(name)
        self.amps = {occ + (0,): a for occ, a in self.amps.items()}

    def phase(self, mode, angle):
        j = self.modes.index(mode)
        w = np.exp(1j * angle)
        self.amps = {occ: a * w ** occ[j] for occ, a in self.amps.items()}

    def split(self, inputs, outputs, U):
        """Two-mode element with U[out, in]; renames the modes to ``outputs``."""
        i, j = (self.modes.index(m) for m in inputs)
        key = tuple(np.asarray(U, dtype=complex).ravel())
        new = defaultdict(complex)
        for occ, a in self.amps.items():
            if a == 0:
                continue
            ni, nj = occ[i], occ[j]
            n = ni + nj
            col = _lifted(key, n)[:, ni]
            for k in range(n + 1):
                c = col[k]
                if c == 0:
                    continue
                o = list(occ)
                o[i], o[j] = k, n - k
                new[tuple(o)] += a * c
        self.amps = dict(new)
        self.modes[i], self.modes[j] = outputs

    def probability(self, occupation: dict) -> float:
        key = tuple(occupation.get(m, 0) for m in self.modes)
        return abs(self.amps.get(key, 0.0)) ** 2

    def marginal(self, modes) -> dict:
        idx = [self.modes.index(m) for m in modes]
        out = defaultdict(float)
        for occ, a in self.amps.items():
            out[tuple(occ[j] for j in idx)] += abs(a) ** 2
        return dict(out)


def evolve(config: CircuitConfig, stage: str) -> FockState:
    """Propagate |N_alpha, N_beta> through the circuit up to ``stage``.

    stage is one of "56", "5p69", "789", "probe".
    """
    if config.N > MAX_N:
        raise ValueError(f"state-vector oracle limited to N <= {MAX_N}")
    st = FockState(["alpha", "beta"], {(config.N_alpha, config.N_beta): 1.0 + 0j})
    st.add_vacuum("va")
    st.split(("alpha", "va"), ("sa", "3"), SOURCE_SPLIT)
    st.add_vacuum("vb")
    st.split(("beta", "vb"), ("sb", "4"), SOURCE_SPLIT)
    st.phase("sa", config.theta)
    st.split(("sa", "sb"), ("1", "2"), SIDE_SPLIT)
    st.phase("3", config.xi)
    st.split(("3", "4"), ("5", "6"), MIDDLE_SPLIT)
    if stage == "56":
        return st
    t = float(config.transmission)
    st_, sr = math.sqrt(t), math.sqrt(max(0.0, 1 - t))
    d9 = np.array([[1j * st_, sr], [-sr, -1j * st_]])
    st.add_vacuum("v9")
    st.split(("5", "v9"), ("5'", "9"), d9)
    st.phase("5'", config.zeta)
    if stage == "5p69":
        return st
    st.split(("5'", "6"), ("7", "8"), FINAL_SPLIT)
    if stage == "789":
        return st
    if config.probe_phase is None:
        raise ValueError("probe stage needs probe_phase")
    st.phase(str(config.probe_arm), config.probe_phase)
    st.split(("7", "8"), ("e7", "e8"), PROBE_SPLIT)
    return st


def statevector_oracle(config: CircuitConfig, outcome: DetectionOutcome) -> float:
    """Joint probability of ``outcome`` read off the evolved Fock state."""
    _check(config, outcome)
    st = evolve(config, outcome.label)
    return st.probability({d.value: m for d, m in outcome.counts.items()})


def oracle_table(config: CircuitConfig, label: str) -> dict:
    """All outcome probabilities of one detector set, keyed by set-ordered tuples."""
    from .circuit import DETECTOR_SETS
    st = evolve(config, label)
    names = [d.value for d in DETECTOR_SETS[label]]
    return st.marginal(names)
