"""Nanopteron construction and verification for the diatomic FPUT lattice."""

from .dispersion import DimerParams, char_function, find_s0, perturbed_eigenvalues, spectral_bound_check
from .lattice import ChainState, advance_delay_residual, first_integral, integrate, profile_state
from .periodic import PeriodicOrbit, solve_periodic
from .projection import EigenBasis, PhasePoint, build_basis, resolvent_solve
from .reduced import FundamentalSet, HomoclinicH, ReducedSystem, constants
from .solver import Construction, SolverOptions, construct

__version__ = "0.1.0"

__all__ = [
    "ChainState",
    "Construction",
    "DimerParams",
    "EigenBasis",
    "FundamentalSet",
    "HomoclinicH",
    "PeriodicOrbit",
    "PhasePoint",
    "ReducedSystem",
    "SolverOptions",
    "advance_delay_residual",
    "build_basis",
    "char_function",
    "constants",
    "construct",
    "find_s0",
    "first_integral",
    "integrate",
    "perturbed_eigenvalues",
    "profile_state",
    "resolvent_solve",
    "solve_periodic",
    "spectral_bound_check",
]
