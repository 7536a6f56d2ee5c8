"""Finite-volume solver for the weighted extension problem.

The problem on the half rectangle ``[x_lo, x_hi] x [0, H]`` is::

    -div(y^a grad v_i) = 0                                   in the interior
    d_nu^a v_i = f_i(v) - beta v_i^p sum_j a_ij v_j^q - M v_i^p   on y = 0
    v_i = g_i                                                on the rest

with ``d_nu^a v = -lim y^a dv/dy``.  Vertical fluxes are written in the
variable ``z = y^(1-a) / (1-a)``, in which ``y^a d/dy = d/dz``; the scheme is
therefore exact on ``v = y^(2s)``.

Since the interior equations are linear, they are eliminated once per
(grid, weight) with a sparse LU factorization; what remains is a dense
M-matrix system on the trace (a discrete Dirichlet-to-Neumann map) that is
solved by damped nonlinear Gauss-Seidel with one monotone scalar solve per
trace node.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    Field,
    Grid,
    ProblemParams,
    ReactionFamily,
    SolveReport,
    eval_reaction,
    make_grid,
    partner_sum,
    reaction_derivative,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when an iterate becomes NaN/inf."""


class SweepOrder(enum.Enum):
    RED_BLACK = "red_black"
    LEXICOGRAPHIC = "lexicographic"


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-8
    max_sweeps: int = 100_000
    damping: float = 1.0
    sweep_order: SweepOrder = SweepOrder.RED_BLACK

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def default_grading(a: float) -> float:
    """Grading exponent making ``z = y^(1-a)`` quasi-uniform near ``y = 0``."""
    return max(1.0, 1.0 / (1.0 - a))


def build_grid(x_lo: float, x_hi: float, H: float, nx: int, ny: int, a: float,
               grading_exponent: Optional[float] = None) -> Grid:
    """Uniform nodes in x, graded nodes ``y_j = H (j/(ny-1))**g`` in y."""
    if not x_lo < x_hi:
        raise ValueError("need x_lo < x_hi")
    if H <= 0:
        raise ValueError("need H > 0")
    if nx < 3 or ny < 3:
        raise ValueError("need nx, ny >= 3")
    g = default_grading(a) if grading_exponent is None else float(grading_exponent)
    if g < 1:
        raise ValueError("grading_exponent must be >= 1")
    x = np.linspace(x_lo, x_hi, nx)
    y = H * (np.arange(ny) / (ny - 1)) ** g
    y[-1] = H
    return make_grid(x, y, a, g)


# ----------------------------------------------------------------------------
# discrete operator


def stiffness_matrix(grid: Grid) -> sp.csr_matrix:
    """Symmetric flux matrix ``K`` with ``(K v)_n = -(net flux into cell n)``.

    For a trace node ``(K v)_n / dx_n`` is the discrete conormal derivative;
    for an interior node ``-(K v)_n / |cell|`` approximates ``div(y^a grad v)``.
    """
    ny, nx = grid.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    hx = np.diff(grid.x_nodes)
    cx = (grid.face_weights_x * grid.row_heights)[:, None] / hx[None, :]
    dz = np.diff(grid.z_nodes)
    cy = grid.dx_cells[None, :] / dz[:, None]
    a_idx = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b_idx = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    c = np.concatenate([cx.ravel(), cy.ravel()])
    rows = np.concatenate([a_idx, b_idx, a_idx, b_idx])
    cols = np.concatenate([a_idx, b_idx, b_idx, a_idx])
    vals = np.concatenate([c, c, -c, -c])
    return sp.coo_matrix((vals, (rows, cols)), shape=(ny * nx, ny * nx)).tocsr()


def node_classes(grid: Grid):
    """Flat indices of (trace, interior, dirichlet) nodes."""
    ny, nx = grid.shape
    idx = np.arange(ny * nx).reshape(ny, nx)
    trace = idx[0, 1:-1].ravel()
    interior = idx[1:-1, 1:-1].ravel()
    mask = np.ones(ny * nx, bool)
    mask[trace] = False
    mask[interior] = False
    return trace, interior, np.flatnonzero(mask)


class TraceOperator:
    """Interior-eliminated form of the discrete operator for one grid.

    ``D`` is the Schur complement of the interior block, so that for any
    field with L_a-harmonic interior, ``(K v)_trace = D u + E g`` where ``u``
    is the trace (without the two Dirichlet corners) and ``g`` the Dirichlet
    samples.
    """

    def __init__(self, grid: Grid, chunk: int = 64):
        self.grid = grid
        K = stiffness_matrix(grid)
        self.K = K
        T, I, Dn = node_classes(grid)
        self.T, self.I, self.Dn = T, I, Dn
        self.K_TT = K[T][:, T].toarray()
        self.K_TI = K[T][:, I].tocsc()
        self.K_TD = K[T][:, Dn].tocsr()
        self.K_IT = K[I][:, T].tocsc()
        self.K_ID = K[I][:, Dn].tocsr()
        self.lu = spla.splu(K[I][:, I].tocsc())
        # only interior nodes adjacent to the trace couple back to it
        rows = np.unique(self.K_TI.nonzero()[1])
        K_TI_r = self.K_TI[:, rows].toarray()
        n = len(T)
        D = self.K_TT.copy()
        K_IT = self.K_IT.toarray() if n <= chunk else None
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            rhs = K_IT[:, start:stop] if K_IT is not None else self.K_IT[:, start:stop].toarray()
            X = self.lu.solve(np.asfortranarray(rhs))
            D[:, start:stop] -= K_TI_r @ X[rows]
        self.D = 0.5 * (D + D.T)
        self._rows = rows
        self._K_TI_r = K_TI_r
        self.dx = grid.dx_cells[1:-1].copy()

    def dirichlet_offset(self, g_flat: np.ndarray) -> np.ndarray:
        """``E g``: the trace flux produced by Dirichlet data with zero trace."""
        gD = g_flat[self.Dn]
        y = self.lu.solve(self.K_ID @ gD)
        return self.K_TD @ gD - self._K_TI_r @ y[self._rows]

    def extend(self, u: np.ndarray, g_flat: np.ndarray) -> np.ndarray:
        """Discrete L_a-harmonic extension of trace ``u`` with Dirichlet data ``g``."""
        v = np.array(g_flat, dtype=float)
        v[self.T] = u
        v[self.I] = -self.lu.solve(self.K_IT @ u + self.K_ID @ g_flat[self.Dn])
        return v


_OPERATOR_CACHE: dict = {}


def trace_operator(grid: Grid) -> TraceOperator:
    """Cached `TraceOperator` (keyed on the grid's node arrays and weight)."""
    key = (grid.x_nodes.tobytes(), grid.y_nodes.tobytes(), grid.a)
    op = _OPERATOR_CACHE.get(key)
    if op is None:
        if len(_OPERATOR_CACHE) > 8:
            _OPERATOR_CACHE.clear()
        op = TraceOperator(grid)
        _OPERATOR_CACHE[key] = op
    return op


_K_CACHE: dict = {}


def _stiffness_cached(grid: Grid) -> sp.csr_matrix:
    key = (grid.x_nodes.tobytes(), grid.y_nodes.tobytes(), grid.a)
    K = _K_CACHE.get(key)
    if K is None:
        if len(_K_CACHE) > 16:
            _K_CACHE.clear()
        K = _K_CACHE[key] = stiffness_matrix(grid)
    return K


def apply_stiffness(grid: Grid, v: np.ndarray) -> np.ndarray:
    K = _stiffness_cached(grid)
    return (K @ np.asarray(v, float).ravel()).reshape(grid.shape)


def interior_defect(field: Field, i: int) -> np.ndarray:
    """Discrete ``div(y^a grad v_i)`` at the interior nodes, shape ``(ny-2, nx-2)``."""
    g = field.grid
    Kv = apply_stiffness(g, field.values[i])
    area = g.row_heights[:, None] * g.dx_cells[None, :]
    return -(Kv / area)[1:-1, 1:-1]


def conormal_trace(field: Field, i: int) -> np.ndarray:
    """Discrete ``d_nu^a v_i`` at the bottom nodes ``1..nx-2``.

    Obtained from the flux balance of the bottom control volume, so it uses
    the exact z-variable flux through the first half cell.
    """
    return conormal_of(field.grid, field.values[i])


def conormal_of(grid: Grid, v: np.ndarray) -> np.ndarray:
    Kv = apply_stiffness(grid, v)
    return Kv[0, 1:-1] / grid.dx_cells[1:-1]


def boundary_rhs(params: ProblemParams, i: int, U: np.ndarray, x=None) -> np.ndarray:
    """``f_i(U) - beta U_i^p S_i - M U_i^p`` on trace values ``U`` (shape (k, n))."""
    U = np.asarray(U, float)
    f = np.broadcast_to(eval_reaction(params.reactions[i], x, U, i), U[i].shape)
    out = f.astype(float)
    if params.beta != 0.0 and params.k > 1:
        out = out - params.beta * np.power(U[i], params.p) * partner_sum(params, i, U)
    if params.absorption:
        out = out - params.absorption * np.power(U[i], params.p)
    return out


def boundary_defect(field: Field, i: int) -> np.ndarray:
    """``d_nu^a v_i - f_i + competition`` at the bottom nodes ``1..nx-2``."""
    U = field.values[:, 0, 1:-1]
    return conormal_trace(field, i) - boundary_rhs(field.params, i, U, field.grid.x_nodes[1:-1])


# ----------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet samples ``g_i`` on the top and lateral boundary nodes.

    ``dirichlet`` has the full grid shape ``(k, ny, nx)``; entries at trace
    and interior nodes are ignored (they are used only as an initial guess).
    """

    dirichlet: np.ndarray
    description: str = "custom"

    def __post_init__(self):
        g = np.array(self.dirichlet, dtype=float)
        if g.ndim == 2:
            g = g[None]
        if not np.all(np.isfinite(g)):
            raise ValueError("Dirichlet samples must be finite")
        bmask = dirichlet_mask(g.shape[1:])
        if np.any(g[:, bmask] < 0):
            raise ValueError("Dirichlet samples must be nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "dirichlet", g)

    @property
    def k(self) -> int:
        return self.dirichlet.shape[0]

    @classmethod
    def from_functions(cls, grid: Grid, funcs: Sequence[Callable], description: str = "custom"):
        X, Y = grid.meshgrid()
        vals = np.stack([np.broadcast_to(np.asarray(f(X, Y), float), grid.shape) for f in funcs])
        return cls(vals, description)

    @classmethod
    def constant(cls, grid: Grid, k: int, c: float):
        return cls(np.full((k,) + grid.shape, float(c)), f"CONSTANT(c={c!r})")

    @classmethod
    def mirror_crossing(cls, grid: Grid):
        """k=2 data ``g_1 = (x - x_lo)/(x_hi - x_lo)``, ``g_2(x, y) = g_1(-x, y)``.

        On a grid symmetric about ``x = 0`` the difference ``g_1 - g_2`` is
        linear, so the two densities meet at ``x = 0``.
        """
        x = grid.x_nodes
        lo, hi = x[0], x[-1]
        g1 = np.broadcast_to((x - lo) / (hi - lo), grid.shape)
        g2 = np.broadcast_to((hi - x) / (hi - lo), grid.shape)
        return cls(np.stack([g1, g2]), "MIRROR_CROSSING")


def dirichlet_mask(shape) -> np.ndarray:
    ny, nx = shape
    m = np.zeros((ny, nx), bool)
    m[-1, :] = True
    m[:, 0] = True
    m[:, -1] = True
    return m


def harmonic_field(params: ProblemParams, grid: Grid, bdata: BoundaryData) -> Field:
    """Discrete L_a-harmonic extension with zero conormal on ``y = 0``.

    Used as the beta=0, f=0 warm start; values are clamped at zero.
    """
    op = trace_operator(grid)
    out = np.empty((params.k,) + grid.shape)
    for i in range(params.k):
        g = bdata.dirichlet[i].ravel()
        rhs = -op.dirichlet_offset(g)
        u = np.linalg.solve(op.D, rhs)
        out[i] = op.extend(u, g).reshape(grid.shape)
    return Field(params, grid, np.maximum(out, 0.0))


# ----------------------------------------------------------------------------
# scalar monotone solves


_TINY = 1e-300


def solve_monotone(phi: Callable, dphi: Callable, lo: np.ndarray, hi: np.ndarray,
                   t0: np.ndarray, xtol: float = 1e-15, maxiter: int = 200):
    """Vectorized safeguarded Newton for ``phi(t) = 0`` on brackets ``[lo, hi]``.

    Requires ``phi(lo) <= 0 <= phi(hi)`` componentwise.  A Newton step is
    taken when it stays strictly inside the current bracket, otherwise the
    bracket is bisected.
    """
    lo = np.array(lo, float)
    hi = np.array(hi, float)
    t = np.clip(np.array(t0, float), lo, hi)
    active = np.ones(t.shape, bool)
    for _ in range(maxiter):
        f = phi(t)
        if not np.all(np.isfinite(f[active])):
            raise SolverError("non-finite value in scalar solve")
        done = f == 0.0
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        d = dphi(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - f / d
        ok = np.isfinite(tn) & (tn > lo) & (tn < hi)
        tn = np.where(ok, tn, 0.5 * (lo + hi))
        width = hi - lo
        # relative tolerance: roots near zero still resolve the steep t^p part
        conv = done | (np.abs(tn - t) <= xtol * np.maximum(_TINY, np.abs(t))) | (
            width <= xtol * np.maximum(_TINY, np.abs(hi)))
        t = np.where(active & ~done, tn, t)
        active &= ~conv
        if not active.any():
            break
    return t


# ----------------------------------------------------------------------------
# nonlinear system


class _TraceProblem:
    """Nonlinear equations ``D u_i + c_i + dx * (M_i(u) ...) = 0`` on the trace."""

    def __init__(self, params: ProblemParams, op: TraceOperator, bdata: BoundaryData):
        self.params = params
        self.op = op
        self.dx = op.dx
        self.x = op.grid.x_nodes[1:-1]
        self.c = np.stack([op.dirichlet_offset(bdata.dirichlet[i].ravel())
                           for i in range(params.k)])
        self.diag = np.diag(op.D).copy()

    def flux(self, U: np.ndarray) -> np.ndarray:
        return U @ self.op.D.T + self.c

    def defect(self, U: np.ndarray) -> np.ndarray:
        """Per-unit-length defect, shape (k, n)."""
        F = self.flux(U) / self.dx
        return F - np.stack([boundary_rhs(self.params, i, U, self.x) for i in range(self.params.k)])

    def projected_defect(self, U: np.ndarray) -> float:
        R = self.defect(U)
        # at clamped nodes only the sign condition (defect >= 0) is required
        R = np.where((U == 0.0) & (R > 0), 0.0, R)
        return float(np.max(np.abs(R))) if R.size else 0.0

    def relax(self, U: np.ndarray, i: int, idx: np.ndarray, omega: float) -> None:
        """Solve the scalar equations of component ``i`` at nodes ``idx`` in place."""
        P = self.params
        r = self.op.D[idx] @ U[i] - self.diag[idx] * U[i, idx] + self.c[i, idx]
        Uloc = U[:, idx].copy()
        S = partner_sum(P, i, Uloc) if (P.k > 1 and P.beta) else np.zeros(len(idx))
        stiff = P.beta * S + P.absorption
        spec = P.reactions[i]
        if P.p == 1.0 and spec.family is not ReactionFamily.LOGISTIC and not spec.cutoff_theta:
            # affine scalar equation: the Newton iteration ends in one step
            f = eval_reaction(spec, None, Uloc, i)
            t = (self.dx[idx] * f - r) / (self.diag[idx] + self.dx[idx] * stiff)
            new = U[i, idx] + omega * (np.maximum(t, 0.0) - U[i, idx])
            if not np.all(np.isfinite(new)):
                raise SolverError("NaN detected in nonlinear sweep")
            U[i, idx] = np.maximum(new, 0.0)
            return
        phi, dphi = self._scalar_maps(i, Uloc, r, stiff, self.diag[idx], self.dx[idx],
                                      self.x[idx])
        phi0 = phi(np.zeros(len(idx)))
        # monotone in t: phi(0) >= 0 means the root is at (or clamped to) zero
        sub = np.flatnonzero(phi0 < 0)
        t = np.zeros(len(idx))
        if len(sub):
            phi, dphi = self._scalar_maps(i, Uloc[:, sub], r[sub], stiff[sub],
                                          self.diag[idx][sub], self.dx[idx][sub],
                                          self.x[idx][sub])
            hi = np.maximum(U[i, idx][sub], -phi0[sub] / self.diag[idx][sub])
            for _ in range(200):
                bad = phi(hi) < 0
                if not bad.any():
                    break
                hi = np.where(bad, 2.0 * hi + 1.0, hi)
            else:
                raise SolverError("could not bracket scalar root")
            t[sub] = solve_monotone(phi, dphi, np.zeros(len(sub)), hi, U[i, idx][sub])
        new = U[i, idx] + omega * (t - U[i, idx])
        if not np.all(np.isfinite(new)):
            raise SolverError("NaN detected in nonlinear sweep")
        U[i, idx] = np.maximum(new, 0.0)

    def _scalar_maps(self, i, Uloc, r, stiff, dnn, dx, x):
        P = self.params
        spec = P.reactions[i]

        def stack(t):
            V = Uloc.copy()
            V[i] = t
            return V

        def phi(t):
            return dnn * t + r + dx * (stiff * np.power(t, P.p)
                                       - eval_reaction(spec, x, stack(t), i))

        def dphi(t):
            if P.p == 1.0:
                dp = np.ones_like(t)
            else:
                with np.errstate(divide="ignore"):
                    dp = P.p * np.power(t, P.p - 1.0)
            dp = np.where(stiff > 0, dp, 0.0)
            return dnn + dx * (stiff * dp - reaction_derivative(spec, stack(t), i))

        return phi, dphi


def _colors(n: int, order: SweepOrder):
    if order is SweepOrder.RED_BLACK:
        ar = np.arange(n)
        return [ar[0::2], ar[1::2]]
    return [np.array([j]) for j in range(n)]


def solve_system(params: ProblemParams, grid: Grid, bdata: BoundaryData,
                 init: Optional[Field] = None, cfg: SolverConfig = SolverConfig(),
                 check_every: int = 1):
    """Solve the discrete competition system.

    Parameters
    ----------
    params, grid
        Problem and mesh; ``grid.a`` must equal ``params.a``.
    bdata
        Dirichlet data on the top and lateral boundary.
    init
        Initial field; defaults to the beta=0 harmonic extension.
    cfg
        Solver controls.

    Returns
    -------
    field : Field
        Final iterate (nonnegative, Dirichlet data imposed exactly).
    report : SolveReport
        ``converged`` is False if ``max_sweeps`` was exhausted.
    """
    t_start = time.perf_counter()
    if abs(grid.a - params.a) > 1e-14:
        raise ValueError(f"grid weight a={grid.a} does not match params a={params.a}")
    if bdata.k != params.k or bdata.dirichlet.shape[1:] != grid.shape:
        raise ValueError("boundary data does not match params/grid")
    op = trace_operator(grid)
    prob = _TraceProblem(params, op, bdata)
    if init is None:
        init = harmonic_field(params, grid, bdata)
    U = np.array(init.values[:, 0, 1:-1], dtype=float)
    if np.any(U < 0) or not np.all(np.isfinite(U)):
        raise ValueError("initial field must be finite and nonnegative")
    colors = _colors(U.shape[1], cfg.sweep_order)
    res = prob.projected_defect(U)
    sweeps = 0
    while res > cfg.tolerance and sweeps < cfg.max_sweeps:
        for idx in colors:
            for i in range(params.k):
                prob.relax(U, i, idx, cfg.damping)
        sweeps += 1
        if sweeps % check_every == 0 or sweeps == cfg.max_sweeps:
            res = prob.projected_defect(U)
            if not np.isfinite(res):
                raise SolverError(f"NaN detected after {sweeps} sweeps")
    converged = res <= cfg.tolerance
    if not converged:
        log.warning("solver stopped after %d sweeps with defect %.3e", sweeps, res)
    vals = np.empty((params.k,) + grid.shape)
    for i in range(params.k):
        vals[i] = op.extend(U[i], bdata.dirichlet[i].ravel()).reshape(grid.shape)
    # the extension is a linear solve with nonnegative data; clip rounding noise
    vals = np.maximum(vals, 0.0)
    report = SolveReport(sweeps, res, bool(converged), time.perf_counter() - t_start,
                         cfg.tolerance)
    return Field(params, grid, vals), report
