"""Heralded NOON-state generation from dual-Fock input: amplitudes, feedforward and quality."""

__version__ = "0.1.0"

from .circuit import CircuitConfig, Detector, DETECTOR_SETS, standard_config
from .engines import (
    DetectionOutcome,
    OutcomeDistribution,
    amplitude_integral,
    amplitude_sum,
    conditional_distribution,
    enumerate_set,
    probability,
)
from .feedforward import FeedforwardPlan, plan
from .quality import QualityReport, q1, q2

__all__ = [
    "__version__",
    "CircuitConfig",
    "Detector",
    "DETECTOR_SETS",
    "standard_config",
    "DetectionOutcome",
    "OutcomeDistribution",
    "amplitude_integral",
    "amplitude_sum",
    "conditional_distribution",
    "enumerate_set",
    "probability",
    "FeedforwardPlan",
    "plan",
    "QualityReport",
    "q1",
    "q2",
]
