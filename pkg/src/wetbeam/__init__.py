"""Wireless energy transfer beamforming for clustered terminals.

Channel statistics, closed-form and EH-constrained precoders, Gamma-law
oracles and a reproducible Monte Carlo harness.
"""
__version__ = "0.1.0"

from .config import ClusterConfig, ConfigError, EhCircuit, SolverOptions, SystemConfig, load_config, operating_point_config
from .precoding import Scheme
from .simulation import StatsSummary, TrialRecord, compare_schemes, harvest, run_trials, summarize, sweep

__all__ = [
    "ClusterConfig", "ConfigError", "EhCircuit", "Scheme", "SolverOptions", "StatsSummary",
    "SystemConfig", "TrialRecord", "__version__", "compare_schemes", "harvest", "load_config",
    "run_trials", "summarize", "sweep", "operating_point_config",
]
