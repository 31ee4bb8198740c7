"""Solver and verification lab for Min{L1 v, L2 v} = 0 in two dimensions."""

from ._core import (
    BellmanProblem,
    Grid2D,
    NumericalError,
    ValidationError,
    c21_seminorm,
    config_roundtrip,
    exact_value,
    extract_gamma,
    flux,
    lipschitz_seminorm,
    manufactured_catalog,
    phase_field,
    run,
    sample_glued_cubic,
    solve_policy_iteration,
    solve_smoothed,
)

__all__ = [
    "BellmanProblem",
    "Grid2D",
    "NumericalError",
    "ValidationError",
    "c21_seminorm",
    "config_roundtrip",
    "exact_value",
    "extract_gamma",
    "flux",
    "lipschitz_seminorm",
    "manufactured_catalog",
    "phase_field",
    "run",
    "sample_glued_cubic",
    "solve_policy_iteration",
    "solve_smoothed",
]
