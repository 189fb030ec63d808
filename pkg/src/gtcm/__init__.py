"""Pseudo-spectral simulator and diagnostics for the 3D generalised tropical
climate model with horizontal viscosity, fractional dissipation and damping."""

from .spectral import Field, Grid, MultiplierSpec, VectorField
from .model import ModelParams, State, Switches, Tendency
from .timestepper import BlowUpError, StepperConfig

__all__ = [
    "BlowUpError",
    "Field",
    "Grid",
    "ModelParams",
    "MultiplierSpec",
    "State",
    "StepperConfig",
    "Switches",
    "Tendency",
    "VectorField",
]
__version__ = "0.1.0"
