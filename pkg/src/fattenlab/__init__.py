"""Numerical laboratory for diffuse-interface motion by mean curvature.

The package evolves the scaled Allen-Cahn equation

    du/dt = lap(u) - f(u)/eps^2,      f(u) = F'(u),  F(u) = (1 - u^2)^2 / 2,

from sharp indicator initial data u0 = 2*chi - 1, and provides the
instruments needed to study the interior interfaces this produces:
heat-smoothed distance functions and comparison profiles, energy and
discrepancy measurements, a level-set reference flow, and a shooting
driver that selects single leaves of a foliation by bisection.
"""

__version__ = "0.1.0"

from .grid import Boundary, Grid, ScalarField
from .geometry import (
    Circle,
    FigureEight,
    KochFlake,
    PolylineShape,
    Sphere,
    SignedDistanceField,
    signed_distance,
    leaf_initial_data,
)
from .ac import ACParams, ACSolution, step, evolve, verify_solution_bounds
from .barriers import (
    smoothed_distance,
    smoothed_properties,
    verify_residual_signs,
    verify_solution_barrier,
    verify_gradient_barrier,
)
from .energy import (
    total_energy_series,
    gaussian_density,
    interface_length_ratio,
)
from .lsf import (
    lsf_evolve,
    fattening_series,
    inner_outer_envelopes,
    sandwich_check,
)
from .shooting import (
    FoliationSpec,
    LeafCache,
    family_value_at,
    check_monotone_in_s,
    bisect_leaf,
    diagonal_study,
    symmetry_deviation,
    multiplicity_probe,
)
from .config import RunConfig, ConfigError, parse_config

__all__ = [
    "__version__",
    "Boundary",
    "Grid",
    "ScalarField",
    "Circle",
    "FigureEight",
    "KochFlake",
    "PolylineShape",
    "Sphere",
    "SignedDistanceField",
    "signed_distance",
    "leaf_initial_data",
    "ACParams",
    "ACSolution",
    "step",
    "evolve",
    "verify_solution_bounds",
    "smoothed_distance",
    "smoothed_properties",
    "verify_residual_signs",
    "verify_solution_barrier",
    "verify_gradient_barrier",
    "total_energy_series",
    "gaussian_density",
    "interface_length_ratio",
    "lsf_evolve",
    "fattening_series",
    "inner_outer_envelopes",
    "sandwich_check",
    "FoliationSpec",
    "LeafCache",
    "family_value_at",
    "check_monotone_in_s",
    "bisect_leaf",
    "diagonal_study",
    "symmetry_deviation",
    "multiplicity_probe",
    "RunConfig",
    "ConfigError",
    "parse_config",
]
