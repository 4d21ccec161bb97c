"""Simulation of NV-detected microscale NMR with spin-locked amplitude encoding."""

from .errors import ArgumentError, ConfigurationError, FitError

__all__ = ["ArgumentError", "ConfigurationError", "FitError", "__version__"]
__version__ = "0.1.0"
