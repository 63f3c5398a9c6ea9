"""Structure-preserving 2D simulator for nematic liquid crystals carrying dissolved ions."""

from .errors import ConfigError, NumericalError, SnapshotError, SolverError
from .grid import Grid
from .material import (
    IonSpecies,
    LeslieCoefficients,
    MaterialParams,
    Permittivity,
    ValidityReport,
    validate_leslie,
)
from .sim import Model, State, integrate, make_state, run, stable_dt, step

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Grid",
    "IonSpecies",
    "LeslieCoefficients",
    "MaterialParams",
    "Model",
    "NumericalError",
    "Permittivity",
    "SnapshotError",
    "SolverError",
    "State",
    "ValidityReport",
    "integrate",
    "make_state",
    "run",
    "stable_dt",
    "step",
    "validate_leslie",
]
