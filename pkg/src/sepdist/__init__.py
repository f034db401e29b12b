"""Exact simulation and verification of entanglement distribution with separable carriers."""

from .bell import BellProtocolConfig, run_bell
from .ghz import GhzProtocolConfig, run_ghz
from .sidon import PhaseSystem, canonical_system, search_min_sidon, verify_conditions

__all__ = [
    "BellProtocolConfig",
    "GhzProtocolConfig",
    "PhaseSystem",
    "canonical_system",
    "run_bell",
    "run_ghz",
    "search_min_sidon",
    "verify_conditions",
]

__version__ = "0.1.0"
