"""Robust symbol-level precoding toolkit.

Channel simulation, constructive-interference constraint geometry, a
log-barrier interior-point baseline, an unfolded proximal network trained
without labels, and binary/ternary weight-quantized variants.
"""

from rslp.errors import (
    DimensionError,
    DomainError,
    FormatError,
    GeometryError,
    InfeasibleError,
    ModulationError,
    NumericalError,
    ParameterError,
    RslpError,
    StateError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "RslpError",
    "DimensionError",
    "ParameterError",
    "ModulationError",
    "GeometryError",
    "NumericalError",
    "DomainError",
    "InfeasibleError",
    "StateError",
    "FormatError",
    "TrainingDivergedError",
]
