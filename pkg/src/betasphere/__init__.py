"""Beta-ensembles on the Riemann sphere and their Wasserstein convergence."""

from ._backend import BACKEND
from .geometry import (
    AT_INFINITY,
    DiscreteMeasure,
    QuadratureRule,
    SpherePoint,
    chordal_distance,
    fibonacci_lattice,
    fs_potential,
    lift,
    product_grid,
    project,
)

__version__ = "0.1.0"

__all__ = [
    "AT_INFINITY",
    "BACKEND",
    "DiscreteMeasure",
    "QuadratureRule",
    "SpherePoint",
    "chordal_distance",
    "fibonacci_lattice",
    "fs_potential",
    "lift",
    "product_grid",
    "project",
]
