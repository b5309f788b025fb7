"""Numerical laboratory for the boundary-driven weakly asymmetric exclusion process.

Computes the nonequilibrium free energy (quasi-potential), the optimal
fluctuation paths that realize it, the dynamical rate functional, the
strong-asymmetry limit, and simulates the underlying lattice gas.
"""

from .core import (
    DensityProfile,
    DomainError,
    Grid,
    NumericsError,
    Params,
    PotentialProfile,
    SpacetimePath,
    default_grid,
    density_of_potential,
    derivative,
    mobility,
    potential_of_density,
    quadrature,
)
from .stationary import (
    StationaryState,
    asymmetric_constants,
    normalization_constant,
    solve_current,
    solve_stationary,
    stationary_profile,
)

__version__ = "0.1.0"

__all__ = [
    "DensityProfile",
    "DomainError",
    "Grid",
    "NumericsError",
    "Params",
    "PotentialProfile",
    "SpacetimePath",
    "StationaryState",
    "asymmetric_constants",
    "default_grid",
    "density_of_potential",
    "derivative",
    "mobility",
    "normalization_constant",
    "potential_of_density",
    "quadrature",
    "solve_current",
    "solve_stationary",
    "stationary_profile",
    "__version__",
]
