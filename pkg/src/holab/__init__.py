"""Geometric phases, holonomies, monotone metrics and speed limits for mixed quantum states."""

from . import bloch, connections, curves, geodesics, metrics, operator_core, qsl, transport
from .connections import ConnectionKind
from .curves import HamiltonianSpec, OperatorCurve, PiecewiseCurve, TimeGrid, concatenate, evolve_density, sample_curve
from .errors import HolabError
from .geodesics import GeodesicSpec, dist_g, euler_poincare_geodesic, hs_geodesic
from .metrics import MetricKind, curve_length, distance, kks_metric, monotone_metric, skew_information
from .operator_core import SpectralData, canonical_amplitude, fidelity, spectral_decompose
from .qsl import observable_stats, orbit_decompose, qsl_evaluate, uncertainty_bounds
from .transport import geometric_phase, horizontal_lift, parallel_transport

__version__ = "0.1.0"

__all__ = [
    "ConnectionKind",
    "GeodesicSpec",
    "HamiltonianSpec",
    "HolabError",
    "MetricKind",
    "OperatorCurve",
    "PiecewiseCurve",
    "SpectralData",
    "TimeGrid",
    "bloch",
    "canonical_amplitude",
    "concatenate",
    "connections",
    "curve_length",
    "curves",
    "dist_g",
    "distance",
    "euler_poincare_geodesic",
    "evolve_density",
    "fidelity",
    "geodesics",
    "geometric_phase",
    "horizontal_lift",
    "hs_geodesic",
    "kks_metric",
    "metrics",
    "monotone_metric",
    "observable_stats",
    "operator_core",
    "orbit_decompose",
    "parallel_transport",
    "qsl",
    "qsl_evaluate",
    "sample_curve",
    "skew_information",
    "spectral_decompose",
    "transport",
    "uncertainty_bounds",
]
