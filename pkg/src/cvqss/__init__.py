"""Sequential continuous-variable quantum secret sharing: key rates, simulation, post-processing."""

from .model import NetworkLayout, NoiseBudget, SystemParams, chi_het, noise_budget, transmittance
from .keyrate import KeyRateReport, PlayerRate, key_rate, qss_rate

__all__ = [
    "KeyRateReport",
    "NetworkLayout",
    "NoiseBudget",
    "PlayerRate",
    "SystemParams",
    "chi_het",
    "key_rate",
    "noise_budget",
    "qss_rate",
    "transmittance",
]
