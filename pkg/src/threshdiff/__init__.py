"""Closed-form analysis of threshold diffusions.

A threshold diffusion follows dX = b(X) dt + sigma(X) dB with piecewise
constant coefficients switching at ordered thresholds.  This package
computes its first-passage Laplace transforms, resolvent densities,
stationary law and escape probabilities in closed form, and ships an
independent Euler-Maruyama Monte Carlo engine plus a verification battery
that cross-checks every analytic surface.
"""

from .errors import (
    ModelValidationError,
    NumericalInstabilityError,
    PreconditionError,
    SimulationError,
    ThresholdDiffusionError,
)
from .model import ThresholdModel, model_from_json, model_to_json, validate

__all__ = [
    "ThresholdModel",
    "model_from_json",
    "model_to_json",
    "validate",
    "ThresholdDiffusionError",
    "ModelValidationError",
    "PreconditionError",
    "NumericalInstabilityError",
    "SimulationError",
]

__version__ = "0.1.0"
