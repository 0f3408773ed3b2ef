"""Deterministic discrete-event simulator for PKI certificate validation
in interplanetary satellite networks."""

__version__ = "0.1.0"

from ._core import BACKEND_NAME

__all__ = ["BACKEND_NAME", "__version__"]
