"""Optimal liquidation with Hawkes order flow, solved by quantized dynamic programming."""
from .errors import (ClampWarning, ConfigError, ContractError, ConvergenceWarning, DomainError,
                     InsufficientDataError, LiqsimError, StabilityError)
from .rng import RngSeed

__version__ = "0.1.0"

__all__ = [
    "RngSeed", "LiqsimError", "ConfigError", "ContractError", "DomainError", "StabilityError",
    "InsufficientDataError", "ClampWarning", "ConvergenceWarning",
]
