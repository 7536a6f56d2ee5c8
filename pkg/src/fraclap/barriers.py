"""Explicit barriers for the absorption problem and the decay check.

The single-density problem

    L_a v = 0 in the half rectangle,   d_nu^a v = -M v^p + h on y = 0,

with ``|h| <= delta`` is expected to satisfy

    sup_{|x| <= 1/2} v(x, 0) <= (1 + delta) M^(-1/p) sup_{half circle r=1} v.

`decay_check` measures both sides on a computed field.  The barrier
functions ``f``, ``g_M`` and the extension ``w_delta`` of ``g_M`` are the
ingredients of the comparison argument behind that estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import beta as beta_fn

from .core import Field, ProblemParams, ReactionFamily, ReactionSpec
from .diagnostics import bilinear
from .solver import BoundaryData, SolverConfig, build_grid, solve_system

QUAD_TOL = 1e-12


class QuadratureError(RuntimeError):
    def __init__(self, achieved: float, target: float):
        super().__init__(f"quadrature error estimate {achieved:.2e} exceeds {target:.2e}")
        self.achieved = achieved


@dataclass(frozen=True)
class BarrierParams:
    a: float
    p: float
    M: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not -1.0 < self.a < 1.0:
            raise ValueError("a must lie in (-1, 1)")
        if self.p <= 0 or self.M <= 0 or self.delta < 0:
            raise ValueError("need p > 0, M > 0, delta >= 0")

    @property
    def s(self) -> float:
        return 0.5 * (1.0 - self.a)

    @property
    def b(self) -> float:
        return 1.0 + (1.0 - self.a) / self.p

    @property
    def c(self) -> float:
        # int_R (1 + t^2)^(-b/2) dt = B(1/2, (b-1)/2)
        return 1.0 / beta_fn(0.5, 0.5 * (self.b - 1.0))

    @property
    def scale(self) -> float:
        return self.M ** (1.0 / (2.0 * self.s))


def _profile(t, b):
    return (1.0 + t * t) ** (-0.5 * b)


def _upper_tail(X: float, b: float) -> float:
    """``int_X^inf (1 + t^2)^(-b/2) dt`` for ``X >= 0``."""
    if X < 1.0:
        head, _ = quad(_profile, X, 1.0, args=(b,), epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        X = 1.0
    else:
        head = 0.0
    # t = 1/u maps [X, inf) to (0, 1/X] with integrand u^(b-2) (1 + u^2)^(-b/2)
    # the algebraic factor u^(b-2) is handled by the weighted rule
    tail, _ = quad(lambda u: (1.0 + u * u) ** (-0.5 * b), 0.0, 1.0 / X, weight="alg",
                   wvar=(b - 2.0, 0.0), epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return head + tail


def barrier_f(x, bp: BarrierParams):
    """``f(x) = c int_{-inf}^x (1 + t^2)^(-b/2) dt``; increasing from 0 to 1."""
    b, c = bp.b, bp.c
    xs = np.asarray(x, float)
    out = np.empty(xs.shape)
    for idx, xv in np.ndenumerate(xs):
        if math.isinf(xv):
            out[idx] = 1.0 if xv > 0 else 0.0
            continue
        tail = c * _upper_tail(abs(xv), b)
        out[idx] = tail if xv < 0 else 1.0 - tail
    return float(out) if out.ndim == 0 else out


def barrier_fM(x, bp: BarrierParams):
    return barrier_f(np.asarray(x, float) * bp.scale, bp)


def barrier_gM(x, bp: BarrierParams):
    """``g_M(x) = f_M(x - 1) + f_M(-x - 1)`` with ``f_M(x) = f(M^(1/2s) x)``."""
    x = np.asarray(x, float)
    out = barrier_fM(x - 1.0, bp) + barrier_fM(-x - 1.0, bp)
    return float(out) if np.ndim(out) == 0 else out


def _one_minus_gM(xi: float, bp: BarrierParams) -> float:
    # 1 - g_M = (1 - f_M(xi - 1)) - f_M(-xi - 1), both as tails for accuracy
    b, c, m = bp.b, bp.c, bp.scale
    u = (xi - 1.0) * m
    w = (-xi - 1.0) * m
    upper = c * _upper_tail(abs(u), b) if u >= 0 else 1.0 - c * _upper_tail(-u, b)
    lower = c * _upper_tail(-w, b) if w <= 0 else 1.0 - c * _upper_tail(w, b)
    return upper - lower


def poisson_mass(a: float) -> float:
    """``int_R (1 + t^2)^(-(2-a)/2) dt``, the mass of the unnormalized kernel."""
    return beta_fn(0.5, 0.5 * (1.0 - a))


def supersolution_wdelta(x: float, y: float, bp: BarrierParams,
                         g: Optional[Callable[[float], float]] = None,
                         tol: float = 1e-8) -> float:
    """``delta M^(-1/p) + P_y * g`` with the mass-one kernel
    ``P_y(xi) ~ y^(1-a) / (xi^2 + y^2)^(1 - a/2)``.

    ``g`` defaults to ``g_M``; for that case the convolution is written as
    ``1 - P_y * (1 - g_M)`` since ``1 - g_M`` is concentrated on ``(-1, 1)``.
    The tails are integrated to infinity by quadrature, so no truncation
    radius is needed.

    Raises
    ------
    QuadratureError
        If the summed error estimate exceeds ``tol``.
    """
    if y < 0:
        raise ValueError("y must be nonnegative")
    base = bp.delta * bp.M ** (-1.0 / bp.p)
    if y == 0.0:
        return base + (barrier_gM(x, bp) if g is None else float(g(x)))
    a = bp.a
    norm = poisson_mass(a)

    def kernel(xi):
        t = (x - xi) / y
        return (1.0 + t * t) ** (-(2.0 - a) / 2.0) / (y * norm)

    if g is None:
        dens = lambda xi: kernel(xi) * _one_minus_gM(xi, bp)
    else:
        dens = lambda xi: kernel(xi) * float(g(xi))
    # geometric cuts around x resolve the kernel peak of width y
    near = y * 10.0 ** np.arange(0, max(1, int(np.ceil(np.log10(4.0 / y)))))
    cuts = sorted({-2.0, -1.0, 1.0, 2.0, float(x)} | set((x + near).tolist()) | set((x - near).tolist()))
    pieces = [(-np.inf, cuts[0])] + list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], np.inf)]
    total = 0.0
    err = 0.0
    for lo, hi in pieces:
        val, e = quad(dens, lo, hi, epsabs=1e-11, epsrel=1e-11, limit=400)
        total += val
        err += e
    if err > tol:
        raise QuadratureError(err, tol)
    conv = 1.0 - total if g is None else total
    return base + conv


# ----------------------------------------------------------------------------
# decay check


@dataclass(frozen=True)
class DecayResult:
    passed: bool
    margin: float
    lhs: float
    rhs: float


def decay_params(s: float, p: float, M: float, delta: float = 0.0) -> ProblemParams:
    """Single density with absorption ``M`` and constant perturbation ``h = delta``."""
    return ProblemParams(s=s, k=1, p=p, absorption=M,
                         reactions=[ReactionSpec.constant(delta)])


def decay_check(field: Field, delta: float, center: float = 0.0,
                n_arc: int = 721) -> DecayResult:
    """Compare ``sup_{|x - center| <= 1/2} v(x, 0)`` with
    ``(1 + delta) M^(-1/p) sup`` of ``v`` on the unit half circle.

    Raises
    ------
    ValueError
        If the field does not carry the absorption boundary condition
        (one density, ``M > 0``, no competition, reaction constant with
        ``|h| <= delta``) or the unit half disc leaves the grid.
    """
    prm = field.params
    if prm.k != 1 or prm.absorption <= 0 or prm.beta != 0:
        raise ValueError("decay_check needs a single density with absorption M > 0")
    rs = prm.reactions[0]
    if rs.family is ReactionFamily.LOGISTIC or abs(rs.lam) > delta + 1e-15:
        raise ValueError("boundary perturbation must be a constant with |h| <= delta")
    g = field.grid
    x = g.x_nodes
    if center - 1 < x[0] - 1e-12 or center + 1 > x[-1] + 1e-12 or g.H < 1 - 1e-12:
        raise ValueError("unit half disc leaves the grid")
    V = field.values[0]
    near = np.abs(x - center) <= 0.5 + 1e-12
    lhs = float(V[0, near].max())
    th = np.linspace(0.0, math.pi, n_arc)
    X = np.clip(center + np.cos(th), x[0], x[-1])
    Y = np.clip(np.sin(th), 0.0, g.H)
    arc, _, _ = bilinear(g, V, X, Y)
    rhs = (1.0 + delta) * prm.absorption ** (-1.0 / prm.p) * float(arc.max())
    margin = rhs - lhs
    return DecayResult(bool(margin >= 0), margin, lhs, rhs)


def solve_decay_scenario(s: float, p: float, M: float, delta: float = 0.0,
                         nx: int = 65, ny: int = 33, boundary_value: float = 1.0,
                         cfg: SolverConfig = SolverConfig()):
    """Solve on ``[-1, 1] x [0, 1]`` with constant Dirichlet data."""
    prm = decay_params(s, p, M, delta)
    grid = build_grid(-1.0, 1.0, 1.0, nx, ny, prm.a)
    bd = BoundaryData.constant(grid, 1, boundary_value)
    return solve_system(prm, grid, bd, cfg=cfg)


DECAY_GRID = dict(M=(10.0, 100.0, 1000.0), p=(0.5, 1.0, 2.0), s=(0.25, 0.5, 0.75))


def decay_grid(delta: float = 0.0, nx: int = 65, ny: int = 33, grid=DECAY_GRID):
    """Rows ``(M, p, s, lhs, rhs, margin, passed)`` over the parameter grid."""
    rows = []
    for M in grid["M"]:
        for p in grid["p"]:
            for s in grid["s"]:
                fld, rep = solve_decay_scenario(s, p, M, delta, nx, ny)
                if not rep.converged:
                    raise RuntimeError(f"decay scenario M={M} p={p} s={s} did not converge")
                r = decay_check(fld, delta)
                rows.append((M, p, s, r.lhs, r.rhs, r.margin, r.passed))
    return rows


def comparison_holds(lower: Field, upper: Field, tol: float = 1e-9) -> bool:
    """True iff ``lower <= upper + tol`` at every node and component."""
    return bool(np.all(lower.values <= upper.values + tol))
