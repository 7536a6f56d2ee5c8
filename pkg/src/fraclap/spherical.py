"""Weighted eigenvalues on arcs of the half circle and partition exponents.

For ``N = 1`` the upper half sphere is the arc ``theta in [0, pi]`` with
weight ``sin(theta)^a``.  The first eigenvalue of a sub-arc is

    lambda_1 = min  int sin^a |u'|^2 / int sin^a u^2

with ``u = 0`` at arc ends inside ``(0, pi)`` and a natural (weighted
Neumann) condition at the equator points ``0`` and ``pi``.  The
discretization is P1 with exact cell integrals of the weight for the
stiffness and a lumped mass built from the same exact integrals, which
reduces to a symmetric tridiagonal eigenproblem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import beta as beta_fn
from scipy.special import betainc

_EQ_TOL = 1e-12


def gamma_char(t, s: float, N: int = 1):
    """``sqrt(((N - 2s)/2)^2 + t) - (N - 2s)/2``; homogeneity of the extension."""
    t_arr = np.asarray(t, float)
    if np.any(t_arr < 0):
        raise ValueError("gamma_char needs t >= 0")
    D = 0.5 * (N - 2.0 * s)
    # rationalized form avoids cancellation for small t
    out = t_arr / (np.sqrt(D * D + t_arr) + D) if D > 0 else np.sqrt(D * D + t_arr) - D
    out = np.where(t_arr == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ArcSpec:
    """Arc ``(theta_lo, theta_hi)`` of ``[0, pi]``.

    Ends at ``0`` or ``pi`` are natural unless forced to Dirichlet with
    ``force_dirichlet_lo`` / ``force_dirichlet_hi``; interior ends are
    always Dirichlet.
    """

    theta_lo: float
    theta_hi: float
    force_dirichlet_lo: bool = False
    force_dirichlet_hi: bool = False

    def __post_init__(self):
        if not (0.0 - _EQ_TOL <= self.theta_lo < self.theta_hi <= math.pi + _EQ_TOL):
            raise ValueError(f"degenerate or out-of-range arc ({self.theta_lo}, {self.theta_hi})")

    @property
    def natural_lo(self) -> bool:
        return abs(self.theta_lo) <= _EQ_TOL and not self.force_dirichlet_lo

    @property
    def natural_hi(self) -> bool:
        return abs(self.theta_hi - math.pi) <= _EQ_TOL and not self.force_dirichlet_hi


def sin_weight_primitive(theta, a: float):
    """``W(theta) = int_0^theta sin(t)^a dt`` via the incomplete beta function."""
    th = np.clip(np.asarray(theta, float), 0.0, math.pi)
    B = beta_fn(0.5 * (a + 1.0), 0.5)
    half = 0.5 * B * betainc(0.5 * (a + 1.0), 0.5, np.sin(np.minimum(th, math.pi - th)) ** 2)
    return np.where(th <= 0.5 * math.pi, half, B - half)


def _arc_matrices(arc: ArcSpec, a: float, n: int):
    nodes = np.linspace(arc.theta_lo, arc.theta_hi, n + 1)
    h = np.diff(nodes)
    W = sin_weight_primitive(nodes, a)
    wcell = np.diff(W)
    k = wcell / h ** 2
    # lumped mass: half of each adjacent cell's weight
    m = np.zeros(n + 1)
    m[:-1] += 0.5 * wcell
    m[1:] += 0.5 * wcell
    diag = np.zeros(n + 1)
    diag[:-1] += k
    diag[1:] += k
    off = -k
    keep = np.ones(n + 1, bool)
    if not arc.natural_lo:
        keep[0] = False
    if not arc.natural_hi:
        keep[-1] = False
    idx = np.nonzero(keep)[0]
    d = diag[idx]
    e = off[idx[:-1]]
    mm = m[idx]
    si = 1.0 / np.sqrt(mm)
    return d * si * si, e * si[:-1] * si[1:]


def arc_eigenvalues(arc: ArcSpec, a: float, resolution: int = 512, count: int = 1) -> np.ndarray:
    """The ``count`` smallest eigenvalues on ``arc`` with ``resolution`` cells."""
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    d, e = _arc_matrices(arc, a, int(resolution))
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1))


def arc_eigenvalue(arc: ArcSpec, a: float, resolution: int = 512) -> float:
    return float(arc_eigenvalues(arc, a, resolution, 1)[0])


def lambda2_halfsphere(a: float, resolution: int = 2048) -> float:
    """Second eigenvalue of the whole half circle (natural at both ends); equals ``1 + a``."""
    return float(arc_eigenvalues(ArcSpec(0.0, math.pi), a, resolution, 2)[1])


@dataclass
class ExponentResult:
    value: float
    optimizer_trace: List[Tuple[tuple, float]] = field(default_factory=list)
    grid_resolution: int = 0

    @property
    def argmin(self) -> tuple:
        return min(self.optimizer_trace, key=lambda t: t[1])[0]


@dataclass(frozen=True)
class OptimizerConfig:
    xtol: float = 1e-4
    scan_points: int = 17
    grid_points: int = 9
    sweeps: int = 4


def _pair_objective(l1: float, l2: float, s: float) -> float:
    return 0.5 * (gamma_char(l1, s) + gamma_char(l2, s))


def optimize_mu(s: float, resolution: int = 512, cfg: OptimizerConfig = OptimizerConfig()) -> ExponentResult:
    """Minimize over the split ``theta*`` the mean of ``gamma(lambda_1)`` of
    ``(0, theta*)`` and ``(theta*, pi)``.

    A coarse scan brackets the minimum, then golden-section search refines
    it to ``cfg.xtol``.
    """
    a = 1.0 - 2.0 * s
    res = ExponentResult(math.inf, [], resolution)

    def obj(t):
        v = _pair_objective(arc_eigenvalue(ArcSpec(0.0, t), a, resolution),
                            arc_eigenvalue(ArcSpec(t, math.pi), a, resolution), s)
        res.optimizer_trace.append(((float(t),), v))
        return v

    ts = np.linspace(0.0, math.pi, cfg.scan_points + 2)[1:-1]
    vals = [obj(t) for t in ts]
    j = int(np.argmin(vals))
    lo = ts[j - 1] if j > 0 else 0.5 * ts[0]
    hi = ts[j + 1] if j + 1 < ts.size else 0.5 * (ts[-1] + math.pi)
    _golden(obj, lo, hi, cfg.xtol)
    res.value = min(v for _, v in res.optimizer_trace)
    return res


def _golden(f, lo: float, hi: float, xtol: float) -> float:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def _nu_arcs(t1: float, t2: float):
    # closing an arc onto the opposite equator point keeps that point Dirichlet
    w1 = ArcSpec(0.0, t1, force_dirichlet_hi=True)
    w2 = ArcSpec(t2, math.pi, force_dirichlet_lo=True)
    return w1, w2


def optimize_nu(s: float, resolution: int = 512, cfg: OptimizerConfig = OptimizerConfig()) -> ExponentResult:
    """Minimize over ``omega_1 = (0, theta_1)``, ``omega_2 = (theta_2, pi)``.

    The arcs may overlap; ``omega_1`` never contains the equator point
    ``pi`` and ``omega_2`` never contains ``0``, so the search runs over the
    closed square ``theta_1, theta_2`` with the far end of a full-length arc
    kept Dirichlet.  A grid search is refined by coordinate-wise
    golden-section passes.
    """
    a = 1.0 - 2.0 * s
    res = ExponentResult(math.inf, [], resolution)
    cache = {}

    def lam1(t1):
        if ("1", t1) not in cache:
            cache[("1", t1)] = arc_eigenvalue(_nu_arcs(t1, 0.0)[0], a, resolution)
        return cache[("1", t1)]

    def lam2(t2):
        if ("2", t2) not in cache:
            cache[("2", t2)] = arc_eigenvalue(_nu_arcs(math.pi, t2)[1], a, resolution)
        return cache[("2", t2)]

    def obj(t1, t2):
        v = _pair_objective(lam1(t1), lam2(t2), s)
        res.optimizer_trace.append(((float(t1), float(t2)), v))
        return v

    grid = np.linspace(0.0, math.pi, cfg.grid_points)
    t1s = grid[1:]
    t2s = grid[:-1]
    best = min(((obj(t1, t2), t1, t2) for t1 in t1s for t2 in t2s))
    _, t1, t2 = best
    step = grid[1] - grid[0]
    for _ in range(cfg.sweeps):
        lo, hi = max(step * 0.05, t1 - step), min(math.pi, t1 + step)
        t1 = _golden_closed(lambda t: obj(t, t2), lo, hi, cfg.xtol)
        lo, hi = max(0.0, t2 - step), min(math.pi - step * 0.05, t2 + step)
        t2 = _golden_closed(lambda t: obj(t1, t), lo, hi, cfg.xtol)
        step *= 0.5
    res.value = min(v for _, v in res.optimizer_trace)
    return res


def _golden_closed(f, lo: float, hi: float, xtol: float) -> float:
    """Golden section that also evaluates both interval ends."""
    x = _golden(f, lo, hi, xtol)
    cands = [(f(lo), lo), (f(hi), hi), (f(x), x)]
    return min(cands)[1]


def exponent_table(s_values, resolution: int = 512, cfg: OptimizerConfig = OptimizerConfig()):
    """Rows ``(s, nu, mu, theta_star)``."""
    rows = []
    for s in s_values:
        nu = optimize_nu(s, resolution, cfg)
        mu = optimize_mu(s, resolution, cfg)
        rows.append((float(s), nu.value, mu.value, mu.argmin[0]))
    return rows
