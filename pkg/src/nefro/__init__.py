"""Coexistence-network feature relationships: simulation, model selection and
learned-constraint optimisation."""

from ._backend import NAME as BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
