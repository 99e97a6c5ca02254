"""Tri-hybrid MIMO transmit simulation: digital, analog and reconfigurable-antenna precoding."""

__version__ = "0.1.0"

from . import exceptions
from .exceptions import (
    ConvergenceError,
    DimensionError,
    InvalidGeometryError,
    LinearityViolationError,
    ModelError,
    PassivityError,
    ScenarioError,
    SingularConfigurationError,
)

__all__ = [
    "__version__",
    "exceptions",
    "ModelError",
    "DimensionError",
    "InvalidGeometryError",
    "SingularConfigurationError",
    "PassivityError",
    "ConvergenceError",
    "LinearityViolationError",
    "ScenarioError",
]
