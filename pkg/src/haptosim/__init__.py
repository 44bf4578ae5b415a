"""Finite-volume solver and theorem monitors for a haptotaxis invasion model."""

from .model import (
    Grid,
    ScalarField,
    FunctionSpec,
    ModelParams,
    SimState,
    ValidationError,
    build_grid,
    initial_state,
    taxis_weight,
)

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "ScalarField",
    "FunctionSpec",
    "ModelParams",
    "SimState",
    "ValidationError",
    "build_grid",
    "initial_state",
    "taxis_weight",
    "__version__",
]
