"""Event-driven Sinai billiard and periodic Lorentz gas with collision statistics."""

from .geometry import BilliardConfig, GeometryError, HorizonClass, build_config, classify_horizon
from .engine import EventKind, ParticleState, next_event, simulate_until, fold_to_cell
from .ensemble import EnsembleSpec, Normalization, run_ensemble
from .moments import EnsembleMoments

__version__ = "0.1.0"

__all__ = [
    "BilliardConfig",
    "GeometryError",
    "HorizonClass",
    "build_config",
    "classify_horizon",
    "EventKind",
    "ParticleState",
    "next_event",
    "simulate_until",
    "fold_to_cell",
    "EnsembleSpec",
    "Normalization",
    "run_ensemble",
    "EnsembleMoments",
]
