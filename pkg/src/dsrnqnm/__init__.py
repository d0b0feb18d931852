"""Resonances and ringdown of charged scalar fields outside DSRN black holes."""

from .spacetime import (
    Horizons,
    SpacetimeParams,
    horizon_roots,
    metric_function,
    params_from_mapping,
    photon_sphere_radius,
    validate_params,
)
from .regge_wheeler import RWChart, build_chart, potentials_at, r_of_x, x_of_r

__all__ = [
    "Horizons",
    "SpacetimeParams",
    "RWChart",
    "build_chart",
    "horizon_roots",
    "metric_function",
    "params_from_mapping",
    "photon_sphere_radius",
    "potentials_at",
    "r_of_x",
    "validate_params",
    "x_of_r",
]

__version__ = "0.1.0"
