"""Scalar conservation laws with a flux jump at x=0 and an interface connection.

The Godunov solver, the exact interface Riemann solver, the time-T
attainability checker, the backward steering construction and the
initial-datum optimizer, with a pure-Python kernel used when the compiled
one is unavailable.
"""

from .attainability import AttainabilityReport, ToleranceSet, check_membership
from .controller import (
    BracketFailure,
    MembershipRequired,
    NotConstructible,
    SteeringPlan,
    evaluate,
    reconstruct_field,
    roundtrip_error,
    steer,
)
from .fileio import ParseError, connection_from_spec, flux_from_spec, parse_profile
from .flux import (
    Connection,
    PolyFlux,
    SplineFlux,
    ValidatedFluxPair,
    adapt_concave,
    connection_from_level,
    greenshields,
    make_connection,
    validate_flux_pair,
)
from .optimize import AdmissibleSet, ControlVector, OptimizationProblem, fuel_problem, l2_problem, optimize
from .profile import InvariantViolation, Profile
from .riemann import TracePair, classify_trace_pair, interface_riemann_sample, interface_traces
from .solver import BACKEND, Field, Grid, evolve, make_grid, padded_grid

__version__ = "0.1.0"

__all__ = [
    "AdmissibleSet",
    "AttainabilityReport",
    "BACKEND",
    "BracketFailure",
    "Connection",
    "ControlVector",
    "Field",
    "Grid",
    "InvariantViolation",
    "MembershipRequired",
    "NotConstructible",
    "OptimizationProblem",
    "ParseError",
    "PolyFlux",
    "Profile",
    "SplineFlux",
    "SteeringPlan",
    "ToleranceSet",
    "TracePair",
    "ValidatedFluxPair",
    "adapt_concave",
    "check_membership",
    "classify_trace_pair",
    "connection_from_level",
    "connection_from_spec",
    "evaluate",
    "evolve",
    "flux_from_spec",
    "fuel_problem",
    "greenshields",
    "interface_riemann_sample",
    "interface_traces",
    "l2_problem",
    "make_connection",
    "make_grid",
    "optimize",
    "padded_grid",
    "parse_profile",
    "reconstruct_field",
    "roundtrip_error",
    "steer",
    "validate_flux_pair",
]
