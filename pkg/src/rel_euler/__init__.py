"""Simulation and verification tools for the relativistic Euler equations."""
from ._backend import BACKEND, HAVE_NUMBA

__version__ = "0.1.0"

__all__ = ["BACKEND", "HAVE_NUMBA", "__version__"]
