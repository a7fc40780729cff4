"""Simulation and limit-theorem laboratory for RCINAR(1) count processes."""

__version__ = "0.1.0"

from .rng import RngStream, stream_id_for
from .distributions import (
    BetaShape,
    Degenerate,
    DiscreteAtoms,
    DiscretePareto,
    Geometric,
    ModelError,
    Poisson,
    StableLaw,
)
from .engine import ModelSpec, StationaryConfig, StationaryMode

__all__ = [
    "RngStream",
    "stream_id_for",
    "BetaShape",
    "Degenerate",
    "DiscreteAtoms",
    "DiscretePareto",
    "Geometric",
    "ModelError",
    "Poisson",
    "StableLaw",
    "ModelSpec",
    "StationaryConfig",
    "StationaryMode",
]
