"""Projected gradient schemes, sweeping-process diagnostics and a distributed
compressed-gradient simulator."""
from ._backend import COMPILED

__version__ = "0.1.0"

__all__ = ["COMPILED", "__version__"]
