"""Shared model parameters, reaction laws and grid functions.

Everything here is plain value data: a problem is fully described by a
`ProblemParams`, a `Grid` and one or more `Field` snapshots, so that runs
can be serialized and replayed exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ReactionFamily(enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class ReactionSpec:
    """Closed family of boundary reaction laws ``f_i(x, t)``.

    ``CONSTANT`` returns ``lam`` and ``LOGISTIC`` returns
    ``lam * t_i * (kappa - t_i)``, where ``t_i`` is the density the reaction
    belongs to.  When ``cutoff_theta > 0`` the value is forced to zero on the
    ball ``|t| < cutoff_theta``.
    """

    family: ReactionFamily = ReactionFamily.ZERO
    lam: float = 0.0
    kappa: float = 1.0
    cutoff_theta: float = 0.0

    def __post_init__(self):
        if self.cutoff_theta < 0:
            raise ValueError("cutoff_theta must be nonnegative")

    @classmethod
    def zero(cls) -> "ReactionSpec":
        return cls(ReactionFamily.ZERO)

    @classmethod
    def constant(cls, lam: float, cutoff_theta: float = 0.0) -> "ReactionSpec":
        return cls(ReactionFamily.CONSTANT, lam=float(lam), cutoff_theta=cutoff_theta)

    @classmethod
    def logistic(cls, lam: float, kappa: float, cutoff_theta: float = 0.0) -> "ReactionSpec":
        return cls(ReactionFamily.LOGISTIC, lam=float(lam), kappa=float(kappa),
                   cutoff_theta=cutoff_theta)


def eval_reaction(spec: ReactionSpec, x, t, i: int = 0):
    """Evaluate the reaction of density ``i``.

    ``t`` is the density vector, indexed along its first axis; every entry
    may be an array (one value per trace node), in which case the result is
    an array too.  ``x`` is accepted for interface symmetry; the built-in
    families are spatially homogeneous.
    """
    t = np.asarray(t, dtype=float)
    own = t[i]
    if spec.family is ReactionFamily.ZERO:
        val = np.zeros_like(own)
    elif spec.family is ReactionFamily.CONSTANT:
        val = np.full_like(own, spec.lam)
    else:
        val = spec.lam * own * (spec.kappa - own)
    if spec.cutoff_theta > 0:
        norm = np.sqrt(np.sum(t * t, axis=0))
        val = np.where(norm < spec.cutoff_theta, 0.0, val)
    if np.ndim(val) == 0:
        return float(val)
    return val


def reaction_derivative(spec: ReactionSpec, t, i: int = 0):
    """Partial derivative of the reaction of density ``i`` w.r.t. ``t_i``.

    The cutoff is treated as piecewise constant (derivative taken on each
    side of the jump).
    """
    t = np.asarray(t, dtype=float)
    own = t[i]
    if spec.family is ReactionFamily.LOGISTIC:
        val = spec.lam * (spec.kappa - 2.0 * own)
    else:
        val = np.zeros_like(own)
    if spec.cutoff_theta > 0:
        norm = np.sqrt(np.sum(t * t, axis=0))
        val = np.where(norm < spec.cutoff_theta, 0.0, val)
    return val


@dataclass(frozen=True)
class ProblemParams:
    """Constants of the competition system.

    ``interaction`` is the k x k matrix ``a_ij`` (zero diagonal).  ``q`` is the
    partner exponent; ``q == p`` is Lotka-Volterra, ``p=1, q=2`` is the
    Gross-Pitaevskii comparison mode.  ``absorption`` adds ``-M v_i^p`` to
    every boundary condition; it is only used by the decay experiments.
    """

    s: float
    k: int = 1
    p: float = 1.0
    q: Optional[float] = None
    beta: float = 0.0
    interaction: Optional[np.ndarray] = None
    reactions: Sequence[ReactionSpec] = ()
    absorption: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0,1), got {self.s}")
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.p <= 0:
            raise ValueError("p must be positive")
        if self.q is None:
            object.__setattr__(self, "q", float(self.p))
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.absorption < 0:
            raise ValueError("absorption must be nonnegative")
        if self.interaction is None:
            A = np.ones((self.k, self.k)) - np.eye(self.k)
        else:
            A = np.array(self.interaction, dtype=float)
        if A.shape != (self.k, self.k):
            raise ValueError(f"interaction must be {self.k}x{self.k}")
        off = ~np.eye(self.k, dtype=bool)
        if np.any(A[off] <= 0):
            raise ValueError("interaction must be strictly positive off the diagonal")
        A[np.diag_indices(self.k)] = 0.0
        A.setflags(write=False)
        object.__setattr__(self, "interaction", A)
        reactions = tuple(self.reactions) or (ReactionSpec.zero(),) * self.k
        if len(reactions) != self.k:
            raise ValueError("need exactly one ReactionSpec per density")
        object.__setattr__(self, "reactions", reactions)

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    def with_beta(self, beta: float) -> "ProblemParams":
        return ProblemParams(s=self.s, k=self.k, p=self.p, q=self.q, beta=beta,
                             interaction=self.interaction, reactions=self.reactions,
                             absorption=self.absorption)

    def __eq__(self, other):
        if not isinstance(other, ProblemParams):
            return NotImplemented
        return (self.s, self.k, self.p, self.q, self.beta, self.reactions, self.absorption) == (
            other.s, other.k, other.p, other.q, other.beta, other.reactions, other.absorption
        ) and np.array_equal(self.interaction, other.interaction)

    __hash__ = None


def competition_term(params: ProblemParams, i: int, t):
    """``beta * t_i^p * sum_{j != i} a_ij t_j^q`` (vectorized over trailing axes)."""
    t = np.asarray(t, dtype=float)
    if params.beta == 0.0 or params.k == 1:
        out = np.zeros_like(t[i])
        return float(out) if out.ndim == 0 else out
    S = partner_sum(params, i, t)
    out = params.beta * np.power(t[i], params.p) * S
    return float(out) if np.ndim(out) == 0 else out


def partner_sum(params: ProblemParams, i: int, t):
    """``sum_{j != i} a_ij t_j^q``."""
    t = np.asarray(t, dtype=float)
    S = np.zeros_like(t[i])
    for j in range(params.k):
        if j != i:
            S = S + params.interaction[i, j] * np.power(t[j], params.q)
    return S


def weight_integral(lo, hi, a: float):
    """Exact ``int_lo^hi y^a dy`` for ``0 <= lo <= hi``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (hi ** (1.0 + a) - lo ** (1.0 + a)) / (1.0 + a)


def weight_mean(lo, hi, a: float):
    """Mean of ``y^a`` over ``[lo, hi]``; at ``lo = 0`` this is ``hi^a / (1+a)``."""
    return weight_integral(lo, hi, a) / (np.asarray(hi, float) - np.asarray(lo, float))


@dataclass(frozen=True)
class Grid:
    """Tensor mesh of the half rectangle ``[x_lo, x_hi] x [0, H]``.

    Nodes are the unknown locations (vertex-centred finite volumes).  Control
    volumes extend half way to the neighbouring nodes.

    Attributes
    ----------
    x_nodes, y_nodes
        Strictly increasing node coordinates, ``y_nodes[0] == 0``.
    a
        Weight exponent ``1 - 2s`` the face weights were computed for.
    grading_exponent
        ``y_j = H (j / (ny-1))**grading_exponent``.
    face_weights_x
        Mean of ``y^a`` over the vertical extent of each row of control
        volumes, shape ``(ny,)``; times the row height it multiplies the
        x-direction fluxes.  At the bottom row this is ``h^a / (1+a)``.
    face_weights_y
        Effective weight of each horizontal face between rows ``j`` and
        ``j+1``, shape ``(ny-1,)``.  It is chosen so the flux
        ``w * (v_{j+1} - v_j) / (y_{j+1} - y_j)`` equals the difference of
        ``z = y^(1-a) / (1-a)``, i.e. ``y^a dv/dy = dv/dz`` exactly.
    """

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    a: float
    grading_exponent: float
    face_weights_x: np.ndarray = field(repr=False)
    face_weights_y: np.ndarray = field(repr=False)

    @property
    def nx(self) -> int:
        return len(self.x_nodes)

    @property
    def ny(self) -> int:
        return len(self.y_nodes)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def H(self) -> float:
        return float(self.y_nodes[-1])

    @property
    def z_nodes(self) -> np.ndarray:
        return self.y_nodes ** (1.0 - self.a) / (1.0 - self.a)

    @property
    def dx_cells(self) -> np.ndarray:
        """Width of each node's control volume along x (half cells at the ends)."""
        x = self.x_nodes
        mid = 0.5 * (x[1:] + x[:-1])
        lo = np.concatenate([[x[0]], mid])
        hi = np.concatenate([mid, [x[-1]]])
        return hi - lo

    @property
    def y_faces(self) -> np.ndarray:
        """Lower and upper y-extent of each row of control volumes, shape (ny, 2)."""
        y = self.y_nodes
        mid = 0.5 * (y[1:] + y[:-1])
        return np.stack([np.concatenate([[0.0], mid]), np.concatenate([mid, [y[-1]]])], axis=1)

    @property
    def row_heights(self) -> np.ndarray:
        f = self.y_faces
        return f[:, 1] - f[:, 0]

    def meshgrid(self):
        return np.meshgrid(self.x_nodes, self.y_nodes)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (np.array_equal(self.x_nodes, other.x_nodes)
                and np.array_equal(self.y_nodes, other.y_nodes)
                and self.a == other.a)

    __hash__ = None


def make_grid(x_nodes, y_nodes, a: float, grading_exponent: float = 1.0) -> Grid:
    """Build a `Grid` from explicit node arrays, computing the face weights."""
    x = np.asarray(x_nodes, dtype=float)
    y = np.asarray(y_nodes, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or len(x) < 3 or len(y) < 3:
        raise ValueError("need at least 3 nodes in each direction")
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise ValueError("node arrays must be strictly increasing")
    if y[0] != 0.0:
        raise ValueError("y_nodes must start at 0")
    if not -1.0 < a < 1.0:
        raise ValueError("weight exponent a must lie in (-1, 1)")
    mid = 0.5 * (y[1:] + y[:-1])
    lo = np.concatenate([[0.0], mid])
    hi = np.concatenate([mid, [y[-1]]])
    fx = weight_mean(lo, hi, a)
    z = y ** (1.0 - a) / (1.0 - a)
    fy = np.diff(y) / np.diff(z)
    for arr in (x, y, fx, fy):
        arr.setflags(write=False)
    return Grid(x, y, float(a), float(grading_exponent), fx, fy)


class Field:
    """k nonnegative grid functions on a `Grid`.

    ``values`` has shape ``(k, ny, nx)``; ``values[i, j, l]`` is component
    ``i`` at node ``(x_l, y_j)``.  The array is read-only; use `replace` to
    derive a new field.
    """

    def __init__(self, params: ProblemParams, grid: Grid, values, check: bool = True):
        vals = np.array(values, dtype=float)
        if vals.ndim == 2:
            vals = vals[None]
        if vals.shape != (params.k,) + grid.shape:
            raise ValueError(f"values must have shape {(params.k,) + grid.shape}, got {vals.shape}")
        if check:
            if not np.all(np.isfinite(vals)):
                raise ValueError("field values must be finite")
            if np.any(vals < 0):
                raise ValueError("field values must be nonnegative")
        vals.setflags(write=False)
        self.params = params
        self.grid = grid
        self.values = vals

    @property
    def k(self) -> int:
        return self.params.k

    def trace(self, i: Optional[int] = None) -> np.ndarray:
        """Bottom values ``u_i(x) = v_i(x, 0)``; all components if ``i`` is None."""
        if i is None:
            return self.values[:, 0, :]
        return self.values[i, 0, :]

    def replace(self, values=None, params=None) -> "Field":
        return Field(params or self.params, self.grid,
                     self.values if values is None else values)

    def __repr__(self):
        return f"Field(k={self.k}, shape={self.grid.shape}, beta={self.params.beta})"


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool
    wall_time: float
    tolerance: float = 0.0
