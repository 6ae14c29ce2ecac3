"""Covariant Berry geometry of non-Hermitian Hamiltonians.

The package computes biorthogonal eigenframes, the metric ``eta = L^dagger L``
and its Hermitizing map, conventional and covariant Berry connections,
curvatures, holonomies, Chern numbers and adiabatic time evolution.
"""
from .errors import NHBerryError
from .numeric import DEFAULT_TOL, Tolerances, eig_general
from .models import HamiltonianField, ModelSpec, make_model, MODEL_NAMES
from .biortho import BiorthFrame, FrameField, FrameTransform, random_gl
from .metric import hermitizing_field, metric_connection, metric_from_left
from .berry import ConnectionProvider, conventional_connections, covariant_connection, hermitian_frame_connection
from .topology import ParamGrid, ParamPath, berry_curvature, berry_phase, chern_number
from .adiabatic import evolve, geometric_phase

__version__ = "0.1.0"

__all__ = [
    "NHBerryError",
    "DEFAULT_TOL",
    "Tolerances",
    "eig_general",
    "HamiltonianField",
    "ModelSpec",
    "make_model",
    "MODEL_NAMES",
    "BiorthFrame",
    "FrameField",
    "FrameTransform",
    "random_gl",
    "hermitizing_field",
    "metric_connection",
    "metric_from_left",
    "ConnectionProvider",
    "conventional_connections",
    "covariant_connection",
    "hermitian_frame_connection",
    "ParamGrid",
    "ParamPath",
    "berry_curvature",
    "berry_phase",
    "chern_number",
    "evolve",
    "geometric_phase",
    "__version__",
]
