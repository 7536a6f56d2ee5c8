"""Finite-volume laboratory for competing densities driven by a fractional
Laplacian, written through its degenerate-elliptic extension."""

from .core import (
    Field,
    Grid,
    ProblemParams,
    ReactionFamily,
    ReactionSpec,
    SolveReport,
    competition_term,
    eval_reaction,
    make_grid,
)
from .solver import (
    BoundaryData,
    SolverConfig,
    SolverError,
    SweepOrder,
    boundary_defect,
    build_grid,
    conormal_trace,
    interior_defect,
    solve_system,
)
from .continuation import BetaLadder, SweepRecord, continue_beta, segregation_reached
from .fieldio import load_field, save_field

__version__ = "0.1.0"
