"""Discrete-event simulator of 802.11 EDCA uplink contention with static and adaptive parameter policies."""

from .kernel import Simulator, run
from .metrics import MetricsLedger, mean_access_delay, normalized_throughput, retransmission_attempts
from .policy import AccessCategory, PolicyKind
from .scenario import ScenarioSpec, standard_grid, parse_scenario

__all__ = [
    "AccessCategory",
    "MetricsLedger",
    "PolicyKind",
    "ScenarioSpec",
    "Simulator",
    "mean_access_delay",
    "normalized_throughput",
    "standard_grid",
    "parse_scenario",
    "retransmission_attempts",
    "run",
]

__version__ = "0.1.0"
