"""Geometric continuation in the competition strength beta.

Each step warm-starts from the previous converged field, so a ladder
``beta_0, beta_0*r, ..., beta_0*r^(steps-1)`` approaches the segregated
profile without ever solving a large-beta problem from scratch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import Field, Grid, ProblemParams, SolveReport
from .solver import (
    BoundaryData,
    SolverConfig,
    SolverError,
    harmonic_field,
    solve_system,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaLadder:
    beta_0: float = 1.0
    ratio: float = 10.0
    steps: int = 7

    def __post_init__(self):
        if not (self.beta_0 > 0):
            raise ValueError("beta_0 must be positive")
        if not (self.ratio > 1):
            raise ValueError("ratio must exceed 1")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")

    def values(self) -> np.ndarray:
        return self.beta_0 * self.ratio ** np.arange(self.steps, dtype=float)


class ContinuationError(SolverError):
    """A ladder step failed; ``step`` is the zero-based index."""

    def __init__(self, step: int, beta: float, msg: str):
        super().__init__(f"step {step} (beta={beta:g}): {msg}")
        self.step = step
        self.beta = beta


@dataclass
class SweepRecord:
    """Per-step convergence indicators along a ladder.

    ``overlap[n, i, j]`` is ``int u_i^p u_j^q dx`` on the trace and
    ``trace_product[n, i, j]`` is ``int u_i u_j dx``; diagonals are zero.
    ``reflection`` is NaN unless ``k == 2``.
    """

    betas: List[float] = field(default_factory=list)
    reports: List[SolveReport] = field(default_factory=list)
    overlap: List[np.ndarray] = field(default_factory=list)
    trace_product: List[np.ndarray] = field(default_factory=list)
    reflection: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.betas)

    @property
    def scaled_overlap(self) -> np.ndarray:
        return np.asarray(self.betas)[:, None, None] * np.asarray(self.overlap)

    def append(self, beta: float, report: SolveReport, fld: Field):
        from .diagnostics import reflection_residual

        O, P = trace_overlaps(fld)
        self.betas.append(float(beta))
        self.reports.append(report)
        self.overlap.append(O)
        self.trace_product.append(P)
        self.reflection.append(reflection_residual(fld) if fld.k == 2 else float("nan"))


def trace_integral(x: np.ndarray, vals: np.ndarray) -> float:
    """Trapezoidal integral of nodal trace values."""
    return float(np.trapezoid(vals, x))


def trace_overlaps(fld: Field):
    """Overlap ``int u_i^p u_j^q`` and plain product ``int u_i u_j`` matrices."""
    prm = fld.params
    x = fld.grid.x_nodes
    U = fld.trace()
    k = prm.k
    O = np.zeros((k, k))
    P = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            O[i, j] = trace_integral(x, U[i] ** prm.p * U[j] ** prm.q)
            P[i, j] = trace_integral(x, U[i] * U[j])
    return O, P


def continue_beta(params: ProblemParams, grid: Grid, bdata: BoundaryData,
                  ladder: BetaLadder = BetaLadder(), cfg: SolverConfig = SolverConfig(),
                  init: Optional[Field] = None, require_convergence: bool = True):
    """Run the beta ladder with warm starts.

    Parameters
    ----------
    params
        Base parameters; ``beta`` is overridden at every step.
    init
        Starting field for the first step; defaults to the harmonic
        (beta = 0, f = 0) extension of the boundary data.
    require_convergence
        Raise :class:`ContinuationError` if any step exhausts its sweep
        budget.

    Returns
    -------
    field : Field
        Converged field at the last step.
    record : SweepRecord
    """
    record = SweepRecord()
    cur = init if init is not None else harmonic_field(params, grid, bdata)
    for n, beta in enumerate(ladder.values()):
        prm = params.with_beta(float(beta))
        try:
            cur, rep = solve_system(prm, grid, bdata, init=cur.replace(params=prm), cfg=cfg)
        except SolverError as exc:
            raise ContinuationError(n, beta, str(exc)) from exc
        if require_convergence and not rep.converged:
            raise ContinuationError(n, beta, f"not converged, defect {rep.final_residual:.3e}")
        record.append(beta, rep, cur)
        log.info("beta=%g sweeps=%d defect=%.2e", beta, rep.iterations, rep.final_residual)
    return cur, record


def default_segregation_eps(grid: Grid, sup_bound: float = 1.0) -> float:
    width = grid.x_nodes[-1] - grid.x_nodes[0]
    return 1e-3 * width * sup_bound ** 2


def segregation_reached(record: SweepRecord, eps: float) -> bool:
    """True iff ``max_{i != j} int u_i u_j <= eps`` at the last step."""
    if record.steps == 0:
        raise ValueError("empty record")
    return bool(np.max(record.trace_product[-1]) <= eps)


def overlap_bounded(record: SweepRecord, factor: float = 10.0) -> bool:
    """Check that ``beta * O_ij`` stays bounded along the ladder.

    The maximum over the last quarter of the steps must be finite and at
    most ``factor`` times the maximum over the first quarter.
    """
    s = record.scaled_overlap.reshape(record.steps, -1).max(axis=1)
    if not np.all(np.isfinite(s)):
        return False
    q = max(1, record.steps // 4)
    return bool(s[-q:].max() <= factor * s[:q].max())
