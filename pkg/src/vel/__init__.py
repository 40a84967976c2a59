"""Verification toolkit for linearized relativistic Euler flow near a vacuum boundary."""

from .thermo import GasParams

__all__ = ["GasParams"]
__version__ = "0.1.0"
