"""Numerics and verification tools for multi-component spin lattice models with
elliptic gamma-function Boltzmann weights."""
from .errors import (ConsistencyError, ConvergenceError, DomainError, MultispinError,
                     PoleError, ZeroProximityError)
from .specfun import Nomes, Regime

__all__ = ["Nomes", "Regime", "MultispinError", "DomainError", "PoleError",
           "ZeroProximityError", "ConvergenceError", "ConsistencyError"]
__version__ = "0.1.0"
