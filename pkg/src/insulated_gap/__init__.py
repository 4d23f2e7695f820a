"""Numerical checks of gradient blow-up between two nearly touching m-convex insulators."""

from .exponents import alpha, alpha_k, blowup_rate, exponent_summary
from .gap_solver import GridSpec, ModeProblem, SolverSpec, solve_mode
from .geometry import FlatPlates, InclusionPair, build_chart
from .harness import SweepConfig, fit_rate, run_sweep, verify_all
from .radial_ode import GapODEProblem, certify_bounds, solve_g

__all__ = [
    "alpha", "alpha_k", "blowup_rate", "exponent_summary",
    "GridSpec", "ModeProblem", "SolverSpec", "solve_mode",
    "FlatPlates", "InclusionPair", "build_chart",
    "SweepConfig", "fit_rate", "run_sweep", "verify_all",
    "GapODEProblem", "certify_bounds", "solve_g",
]
