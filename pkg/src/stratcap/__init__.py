"""Spectral calculus, fractional semigroups and capacities on discretized stratified groups.

The sub-Laplacian of R^1, R^2 or the first Heisenberg group is discretized on
a lattice window and diagonalized once; every operator (heat, fractional heat,
fractional Poisson, fractional powers, Riesz potentials) is then a spectral
multiplier. Capacities, Besov seminorms and the Carleson and trace embedding
verifiers are built on top of that calculus.
"""

from .besov import BesovParams, besov_norm, besov_seminorm, sobolev_norm
from .capacity import (
    DiscreteSet,
    SolverOptions,
    besov_capacity,
    capacitary_integral,
    riesz_capacity,
    sobolev_capacity,
)
from .embedding import DiscreteMeasure, carleson_embedding_verify, trace_embedding_verify
from .errors import (
    CertificationFailure,
    ConsistencyFailure,
    EquivalenceFailure,
    InvalidArgument,
    NumericError,
    ResolutionWarning,
    ResourceLimitError,
    SingularMultiplierError,
    StratcapError,
    UnsupportedParameter,
    ZeroModeError,
)
from .fractional import frac_power, maximal_function, riesz_potential, riesz_transform
from .grid import Grid, GridFunction, SpectralOperator, build_sublaplacian
from .groups import get_group
from .semigroups import frac_heat_apply, heat_apply, poisson_apply
from .suites import standard_suite

__version__ = "0.1.0"

__all__ = [
    "BesovParams", "besov_norm", "besov_seminorm", "sobolev_norm",
    "DiscreteSet", "SolverOptions", "besov_capacity", "capacitary_integral", "riesz_capacity", "sobolev_capacity",
    "DiscreteMeasure", "carleson_embedding_verify", "trace_embedding_verify",
    "CertificationFailure", "ConsistencyFailure", "EquivalenceFailure", "InvalidArgument", "NumericError",
    "ResolutionWarning", "ResourceLimitError", "SingularMultiplierError", "StratcapError",
    "UnsupportedParameter", "ZeroModeError",
    "frac_power", "maximal_function", "riesz_potential", "riesz_transform",
    "Grid", "GridFunction", "SpectralOperator", "build_sublaplacian", "get_group",
    "frac_heat_apply", "heat_apply", "poisson_apply", "standard_suite",
]
