"""Simulation and analysis of a current-biased Josephson junction photon detector."""
from .errors import (
    BudgetExceededError,
    CbjjError,
    ConfigError,
    DomainError,
    FitError,
    IntegrationError,
    ValidityWarning,
)
from .escape import RateCurve, ThermalEnvironment, kramers_rate, poisson_switch_probability
from .junction import JunctionParams, RfPulse, barrier_height, level_count, plasma_frequency

__version__ = "0.1.0"

__all__ = [
    "BudgetExceededError", "CbjjError", "ConfigError", "DomainError", "FitError",
    "IntegrationError", "JunctionParams", "RateCurve", "RfPulse", "ThermalEnvironment",
    "ValidityWarning", "barrier_height", "kramers_rate", "level_count", "plasma_frequency",
    "poisson_switch_probability", "__version__",
]
