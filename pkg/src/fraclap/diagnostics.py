"""Functionals used to characterize computed fields.

Radial functionals (ACF product, Almgren-type E/H, Morrey quotient) are
evaluated by polar quadrature of the bilinear interpolant, so radii need
not coincide with grid lines.  For centers on ``y = 0`` the angular weight
``sin(theta)^a`` is integrated with Gauss-Jacobi nodes, which keeps the
quadrature accurate for ``a < 0`` where the weight is singular.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .core import Field, Grid, eval_reaction, partner_sum
from .solver import conormal_of

_TINY = 1e-300


@dataclass(frozen=True)
class RadialProfile:
    radii: np.ndarray
    values: np.ndarray
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        r = np.asarray(self.radii, float)
        v = np.asarray(self.values, float)
        if r.shape != v.shape:
            raise ValueError("radii and values must have equal lengths")
        if r.size > 1 and np.any(np.diff(r) <= 0):
            raise ValueError("radii must be increasing")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "values", v)

    def max_relative_dip(self) -> float:
        """Largest relative decrease between consecutive radii (0 if monotone)."""
        v = self.values
        if v.size < 2:
            return 0.0
        scale = np.maximum(np.abs(v[:-1]), _TINY)
        return float(max(0.0, np.max((v[:-1] - v[1:]) / scale)))


@dataclass(frozen=True)
class HatField:
    """``v_hat_i = v_i - sum_{j != i} (a_ij / a_ji) v_j``; may be negative."""

    values: np.ndarray
    grid: Grid

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def positive(self, i: int) -> np.ndarray:
        return np.maximum(self.values[i], 0.0)

    def negative(self, i: int) -> np.ndarray:
        return np.maximum(-self.values[i], 0.0)


def _hat_coefficients(A: np.ndarray) -> np.ndarray:
    k = A.shape[0]
    C = np.eye(k)
    for i in range(k):
        for j in range(k):
            if i != j:
                C[i, j] = -A[i, j] / A[j, i]
    return C


def hat_field(field: Field) -> HatField:
    C = _hat_coefficients(field.params.interaction)
    vals = np.einsum("ij,jyx->iyx", C, field.values)
    vals.setflags(write=False)
    return HatField(vals, field.grid)


# ----------------------------------------------------------------------------
# interpolation and quadrature


def _locate(nodes: np.ndarray, q: np.ndarray):
    idx = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, len(nodes) - 2)
    h = nodes[idx + 1] - nodes[idx]
    return idx, (q - nodes[idx]) / h, h


def bilinear(grid: Grid, V: np.ndarray, X, Y):
    """Bilinear interpolant of nodal values ``V`` and its cellwise gradient.

    Returns ``(value, d/dx, d/dy)`` at the points ``(X, Y)``.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    i, tx, hx = _locate(grid.x_nodes, X)
    j, ty, hy = _locate(grid.y_nodes, Y)
    v00 = V[j, i]
    v01 = V[j, i + 1]
    v10 = V[j + 1, i]
    v11 = V[j + 1, i + 1]
    val = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)
    gx = ((1 - ty) * (v01 - v00) + ty * (v11 - v10)) / hx
    gy = ((1 - tx) * (v10 - v00) + tx * (v11 - v01)) / hy
    return val, gx, gy


def _spacing(grid: Grid) -> float:
    return float(np.min(np.diff(grid.x_nodes)))


def _angular_rule(n: int, a: float):
    """Nodes/weights for ``int_0^pi F(theta) sin(theta)^a dtheta``.

    Gauss-Jacobi on ``[theta (pi - theta)]^a`` times the smooth factor
    ``(sin(theta) / (theta (pi - theta)))^a``.
    """
    if a == 0.0:
        t, w = roots_legendre(n)
        return 0.5 * np.pi * (t + 1.0), 0.5 * np.pi * w
    t, w = roots_jacobi(n, a, a)
    th = 0.5 * np.pi * (t + 1.0)
    # (1-t)(1+t) = 4 th (pi - th) / pi^2
    scale = (0.5 * np.pi) * (np.pi ** 2 / 4.0) ** a
    smooth = (np.sin(th) / (th * (np.pi - th))) ** a
    return th, w * scale * smooth


def _check_half_disc(grid: Grid, x0: float, radii: np.ndarray):
    r = np.asarray(radii, float)
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("radii must be positive")
    rmax = r.max()
    if x0 - rmax < grid.x_nodes[0] - 1e-12 or x0 + rmax > grid.x_nodes[-1] + 1e-12 \
            or rmax > grid.H + 1e-12:
        raise ValueError(f"radius {rmax} exceeds the domain around x0={x0}")


def half_disc_integrals(grid: Grid, integrand, x0: float, radii, a_theta: float = 0.0,
                        rho_power: float = 1.0, pts_per_cell: int = 4) -> np.ndarray:
    """Cumulative ``int_0^r int_0^pi F rho^rho_power sin^a_theta dtheta drho``.

    ``integrand(X, Y)`` returns ``F`` at arrays of points.  One value per
    radius (radii increasing).
    """
    r = np.asarray(radii, float)
    _check_half_disc(grid, x0, r)
    h = _spacing(grid)
    ntheta = max(64, int(np.ceil(pts_per_cell * np.pi * r.max() / h)))
    th, wth = _angular_rule(ntheta, a_theta)
    edges = np.concatenate([[0.0], r])
    out = np.empty(r.size)
    acc = 0.0
    for n in range(r.size):
        lo, hi = edges[n], edges[n + 1]
        nr = max(6, int(np.ceil(pts_per_cell * (hi - lo) / h)))
        t, w = roots_legendre(nr)
        rho = lo + 0.5 * (hi - lo) * (t + 1.0)
        wr = 0.5 * (hi - lo) * w * rho ** rho_power
        R, T = np.meshgrid(rho, th, indexing="ij")
        X = np.clip(x0 + R * np.cos(T), grid.x_nodes[0], grid.x_nodes[-1])
        Y = np.clip(R * np.sin(T), 0.0, grid.H)
        F = integrand(X, Y)
        acc += float(wr @ F @ wth)
        out[n] = acc
    return out


def _weighted_grad_sq(grid: Grid, V: np.ndarray):
    def F(X, Y):
        _, gx, gy = bilinear(grid, V, X, Y)
        return gx * gx + gy * gy

    return F


def _trace_interp(grid: Grid, u: np.ndarray, X):
    return np.interp(X, grid.x_nodes, u)


def _segment_integral(grid: Grid, F, lo: float, hi: float) -> float:
    """Integral of a function of x over ``[lo, hi]`` split at grid nodes."""
    x = grid.x_nodes
    cuts = np.concatenate([[lo], x[(x > lo) & (x < hi)], [hi]])
    t, w = roots_legendre(4)
    A = cuts[:-1, None]
    B = cuts[1:, None]
    pts = A + 0.5 * (B - A) * (t + 1.0)
    return float(np.sum(0.5 * (B - A) * w * F(pts)))


# ----------------------------------------------------------------------------
# quotients


def _subdomain_mask(grid: Grid, subdomain):
    x0, x1, y0, y1 = subdomain
    X, Y = grid.meshgrid()
    return (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)


def holder_quotient(field: Field, i: int, alpha: float, subdomain,
                    max_lattice: int = 1200, full: bool = False) -> float:
    """Sampled ``C^{0,alpha}`` seminorm of component ``i``.

    Parameters
    ----------
    subdomain
        ``(x_lo, x_hi, y_lo, y_hi)``; nodes inside are sampled.
    max_lattice
        Size cap of the decimated lattice used for long-range pairs.
    full
        Enumerate every node pair instead (quadratic cost).
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return _holder(field.grid, field.values[i], alpha, subdomain, max_lattice, full)


def _holder(grid: Grid, V: np.ndarray, alpha: float, subdomain, max_lattice=1200, full=False):
    mask = _subdomain_mask(grid, subdomain)
    if not mask.any():
        raise ValueError("empty subdomain")
    X, Y = grid.meshgrid()
    best = 0.0
    # adjacent pairs, including diagonals
    for dj, di in ((0, 1), (1, 0), (1, 1), (1, -1)):
        j0 = slice(0, grid.ny - dj)
        j1 = slice(dj, grid.ny)
        i0 = slice(max(0, -di), grid.nx - max(0, di))
        i1 = slice(max(0, di), grid.nx + min(0, di))
        m = mask[j0, i0] & mask[j1, i1]
        if not m.any():
            continue
        dv = np.abs(V[j1, i1] - V[j0, i0])[m]
        d = np.hypot(X[j1, i1] - X[j0, i0], Y[j1, i1] - Y[j0, i0])[m]
        best = max(best, float(np.max(dv / d ** alpha)))
    jj, ii = np.nonzero(mask)
    if not full:
        stride = 1
        while np.count_nonzero((jj % stride == 0) & (ii % stride == 0)) > max_lattice:
            stride += 1
        keep = (jj % stride == 0) & (ii % stride == 0)
        jj, ii = jj[keep], ii[keep]
    px, py, pv = X[jj, ii], Y[jj, ii], V[jj, ii]
    n = pv.size
    chunk = max(1, 2_000_000 // max(n, 1))
    for s0 in range(0, n, chunk):
        sl = slice(s0, min(n, s0 + chunk))
        d = np.hypot(px[sl, None] - px[None, :], py[sl, None] - py[None, :])
        dv = np.abs(pv[sl, None] - pv[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(d > 0, dv / np.where(d > 0, d, 1.0) ** alpha, 0.0)
        best = max(best, float(q.max()))
    return best


def morrey_quotient(field: Field, center, radii, eps: float) -> RadialProfile:
    """``r^-(N+1-2 eps) int_{B_r(X) ∩ {y>0}} sum_i |grad v_i|^2`` with ``N = 1``.

    No ``y^a`` weight is applied; for ``s != 1/2`` the quotient is only a
    heuristic indicator.
    """
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    g = field.grid
    cx, cy = (center, 0.0) if np.ndim(center) == 0 else (float(center[0]), float(center[1]))
    r = np.asarray(radii, float)
    if np.any(np.diff(r) <= 0) or np.any(r <= 0):
        raise ValueError("radii must be positive and increasing")
    if cy < 0 or cx - r.max() < g.x_nodes[0] - 1e-12 or cx + r.max() > g.x_nodes[-1] + 1e-12 \
            or cy + r.max() > g.H + 1e-12:
        raise ValueError("ball exceeds the domain")

    def F(X, Y):
        tot = np.zeros_like(X)
        for i in range(field.k):
            _, gx, gy = bilinear(g, field.values[i], X, Y)
            tot += gx * gx + gy * gy
        return tot

    vals = np.array([_clipped_disc_integral(g, F, cx, cy, rr) for rr in r])
    return RadialProfile(r, vals / r ** (2.0 - 2.0 * eps), (cx, cy))


def _clipped_disc_integral(grid: Grid, F, cx: float, cy: float, r: float,
                           pts_per_cell: int = 4) -> float:
    """``int`` of F over the disc ``B_r(cx, cy)`` intersected with ``y > 0``."""
    h = _spacing(grid)
    if cy == 0.0:
        return float(half_disc_integrals(grid, F, cx, [r], 0.0, 1.0, pts_per_cell)[0])
    ntheta = max(128, int(np.ceil(2 * pts_per_cell * np.pi * r / h)))
    nr = max(8, int(np.ceil(pts_per_cell * r / h)))
    if cy >= r:
        t, w = roots_legendre(ntheta)
        th = np.pi * (t + 1.0)
        wth = np.pi * w
        rmax = np.full_like(th, r)
    else:
        # split angles at the points where the circle meets y = 0
        phi = np.arcsin(cy / r)
        segs = [(-phi, np.pi + phi), (np.pi + phi, 2 * np.pi - phi)]
        th_l, w_l = [], []
        t, w = roots_legendre(ntheta // 2)
        for lo, hi in segs:
            th_l.append(lo + 0.5 * (hi - lo) * (t + 1.0))
            w_l.append(0.5 * (hi - lo) * w)
        th = np.concatenate(th_l)
        wth = np.concatenate(w_l)
        s = np.sin(th)
        rmax = np.where(s < 0, np.minimum(r, cy / np.maximum(-s, _TINY)), r)
    tr, wr = roots_legendre(nr)
    rho = 0.5 * rmax[None, :] * (tr[:, None] + 1.0)
    wgt = 0.5 * rmax[None, :] * wr[:, None] * rho
    X = np.clip(cx + rho * np.cos(th)[None, :], grid.x_nodes[0], grid.x_nodes[-1])
    Y = np.clip(cy + rho * np.sin(th)[None, :], 0.0, grid.H)
    return float(np.sum(wgt * F(X, Y) * wth[None, :]))


# ----------------------------------------------------------------------------
# ACF product and Almgren-type functionals


def acf_quotient(z1: np.ndarray, z2: np.ndarray, grid: Grid, center: float, mu: float,
                 radii, trace_tol: float = 1e-6, center_tol: float = 1e-3) -> RadialProfile:
    """``prod_i r^(-2 mu) int_{B_r^+} y^a |grad z_i|^2 / |X - X0|^(1-2s)``.

    ``z1``, ``z2`` are nodal arrays of shape ``(ny, nx)``.  With ``N = 1`` the
    kernel exponent equals ``a``, so in polar coordinates the integrand is
    ``sin(theta)^a |grad z|^2`` and the center singularity disappears.

    Raises
    ------
    ValueError
        If ``z1 * z2`` exceeds ``trace_tol`` at some trace node, or a ``z_i``
        is not (nearly) zero at the center.
    """
    z1 = np.asarray(z1, float)
    z2 = np.asarray(z2, float)
    prod = z1[0] * z2[0]
    bad = np.nonzero(prod > trace_tol)[0]
    if bad.size:
        raise ValueError(f"segregation violated at trace nodes {bad.tolist()}")
    for z in (z1, z2):
        zc = float(np.interp(center, grid.x_nodes, z[0]))
        if abs(zc) > center_tol:
            raise ValueError(f"z does not vanish at the center (value {zc:.3e})")
    r = np.asarray(radii, float)
    out = np.ones_like(r)
    for z in (z1, z2):
        I = half_disc_integrals(grid, _weighted_grad_sq(grid, z), center, r,
                                a_theta=grid.a, rho_power=1.0)
        out = out * I / r ** (2.0 * mu)
    return RadialProfile(r, out, (float(center), 0.0))


@dataclass(frozen=True)
class AlmgrenProfiles:
    E: RadialProfile
    H: RadialProfile
    dH: np.ndarray
    defect: np.ndarray


def almgren_EH(field: Field, i: int, center: float, radii, dr: Optional[float] = None) -> AlmgrenProfiles:
    """Energy ``E(r)`` and height ``H(r)`` of component ``i`` around ``(center, 0)``.

    With ``N = 1``::

        E(r) = r^-a ( int_{B_r^+} y^a |grad v|^2
                      + int_{-r}^{r} (-f v + beta v^(p+1) S + M v^(p+1)) dx )
        H(r) = int_0^pi sin(theta)^a v(r, theta)^2 dtheta

    and solutions satisfy ``H'(r) = 2 E(r) / r``.  ``dH`` is the centered
    difference ``(H(r + dr) - H(r - dr)) / (2 dr)`` with ``dr`` half a cell
    by default, so its error is tied to the mesh rather than to the radii
    spacing; ``defect`` is ``dH - 2E/r``.
    """
    g = field.grid
    prm = field.params
    a = g.a
    r = np.asarray(radii, float)
    V = field.values[i]
    dirichlet = half_disc_integrals(g, _weighted_grad_sq(g, V), center, r,
                                    a_theta=a, rho_power=1.0 + a)
    U = field.trace()
    x = g.x_nodes

    def boundary_density(xs):
        Ut = np.stack([np.interp(xs, x, U[j]) for j in range(prm.k)])
        ui = Ut[i]
        val = -np.broadcast_to(eval_reaction(prm.reactions[i], xs, Ut, i), ui.shape) * ui
        if prm.beta and prm.k > 1:
            val = val + prm.beta * ui ** (prm.p + 1.0) * partner_sum(prm, i, Ut)
        if prm.absorption:
            val = val + prm.absorption * ui ** (prm.p + 1.0)
        return val

    bnd = np.array([_segment_integral(g, boundary_density, center - rr, center + rr) for rr in r])
    E = r ** (-a) * (dirichlet + bnd)
    step = 0.5 * _spacing(g) if dr is None else float(dr)
    H = _height(g, V, center, r)
    dH = (_height(g, V, center, r + step) - _height(g, V, center, r - step)) / (2.0 * step)
    c = (float(center), 0.0)
    return AlmgrenProfiles(RadialProfile(r, E, c), RadialProfile(r, H, c), dH, dH - 2.0 * E / r)


def _height(grid: Grid, V: np.ndarray, center: float, radii: np.ndarray) -> np.ndarray:
    r = np.asarray(radii, float)
    _check_half_disc(grid, center, r)
    th, wth = _angular_rule(max(128, int(8 * np.pi * r.max() / _spacing(grid))), grid.a)
    x = grid.x_nodes
    X = np.clip(center + r[:, None] * np.cos(th)[None, :], x[0], x[-1])
    Y = np.clip(r[:, None] * np.sin(th)[None, :], 0.0, grid.H)
    val, _, _ = bilinear(grid, V, X, Y)
    return (val * val) @ wth


# ----------------------------------------------------------------------------
# limit-system residuals


def _reactions_on_trace(field: Field) -> np.ndarray:
    prm = field.params
    U = field.values[:, 0, 1:-1]
    xs = field.grid.x_nodes[1:-1]
    return np.stack([np.broadcast_to(eval_reaction(prm.reactions[i], xs, U, i), U[i].shape)
                     for i in range(prm.k)]).astype(float)


def reflection_residual(field: Field) -> float:
    """``sup |d_nu^a(a21 v1 - a12 v2) - (a21 f1 - a12 f2)|`` over trace nodes."""
    if field.k != 2:
        raise ValueError("reflection_residual needs k == 2; use segregation_system_residual")
    A = field.params.interaction
    w = A[1, 0] * field.values[0] - A[0, 1] * field.values[1]
    f = _reactions_on_trace(field)
    rhs = A[1, 0] * f[0] - A[0, 1] * f[1]
    return float(np.max(np.abs(conormal_of(field.grid, w) - rhs)))


def segregation_system_residual(field: Field) -> np.ndarray:
    """Worst violations of the segregated limit system, shape ``(k, 3)``.

    Columns: ``max(d_nu v_i - f_i, 0)``, ``max(f_hat_i - d_nu v_hat_i, 0)``,
    ``max |v_i (d_nu v_hat_i - f_hat_i)|`` over the trace nodes, where
    ``f_hat_i = f_i - sum_j (a_ij / a_ji) f_j``.
    """
    g = field.grid
    C = _hat_coefficients(field.params.interaction)
    f = _reactions_on_trace(field)
    fh = C @ f
    hat = hat_field(field).values
    out = np.zeros((field.k, 3))
    U = field.values[:, 0, 1:-1]
    for i in range(field.k):
        dn = conormal_of(g, field.values[i])
        dnh = conormal_of(g, hat[i])
        out[i, 0] = max(0.0, float(np.max(dn - f[i])))
        out[i, 1] = max(0.0, float(np.max(fh[i] - dnh)))
        out[i, 2] = float(np.max(np.abs(U[i] * (dnh - fh[i]))))
    return out


# ----------------------------------------------------------------------------
# free boundary and local exponents


def default_threshold(tolerance: float = 1e-8) -> float:
    return 10.0 * np.sqrt(tolerance)


def free_boundary(field: Field, threshold: Optional[float] = None) -> np.ndarray:
    """Trace indices where every component is below ``threshold``."""
    thr = default_threshold() if threshold is None else threshold
    U = field.trace()
    return np.nonzero(np.all(U < thr, axis=0))[0]


def clusters(indices: Sequence[int]):
    """Split sorted indices into runs of consecutive integers."""
    idx = np.asarray(indices, int)
    if idx.size == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0] + 1
    return [c for c in np.split(idx, breaks)]


def free_boundary_point(field: Field, threshold: Optional[float] = None) -> int:
    """Representative free-boundary node: the smallest ``sum_i u_i`` on the
    largest cluster."""
    fb = free_boundary(field, threshold)
    if fb.size == 0:
        raise ValueError("no free-boundary nodes below the threshold")
    cl = max(clusters(fb), key=len)
    tot = field.trace().sum(axis=0)[cl]
    return int(cl[np.argmin(tot)])


def multiplicity(field: Field, x0: int, threshold: float, r: float) -> int:
    """Number of components exceeding ``threshold`` within distance ``r`` of node ``x0``."""
    x = field.grid.x_nodes
    near = np.abs(x - x[x0]) <= r + 1e-14
    U = field.trace()[:, near]
    return int(np.count_nonzero(np.any(U > threshold, axis=1)))


def default_fit_radii(x_nodes, x0: int, n: int = 8) -> np.ndarray:
    """Geometric radii from four cells to half the distance to the nearer end."""
    x = np.asarray(x_nodes, float)
    h = float(np.min(np.diff(x)))
    reach = 0.5 * min(x[x0] - x[0], x[-1] - x[x0])
    if reach <= 4 * h:
        raise ValueError("center too close to the ends for a radius fit")
    return np.geomspace(4 * h, reach, n)


def fit_local_exponent(trace, x0: int, radii=None, x_nodes=None) -> float:
    """Slope of ``log osc_{[x0-r, x0+r]} u`` against ``log r``.

    ``trace`` is one trace or a ``(k, n)`` stack; for a stack the
    oscillation of the vector (the largest componentwise oscillation) is
    used.  ``x_nodes`` defaults to unit spacing, ``radii`` to
    `default_fit_radii`.  Radii whose window leaves the array, contains
    fewer than two other nodes, or has zero oscillation are discarded.

    Raises
    ------
    ValueError
        If fewer than three radii remain.
    """
    u = np.atleast_2d(np.asarray(trace, float))
    n = u.shape[1]
    x = np.arange(n, dtype=float) if x_nodes is None else np.asarray(x_nodes, float)
    if radii is None:
        radii = default_fit_radii(x, x0)
    xc = x[x0]
    logs_r, logs_o = [], []
    for r in np.asarray(radii, float):
        if xc - r < x[0] - 1e-12 or xc + r > x[-1] + 1e-12:
            continue
        w = np.abs(x - xc) <= r * (1 + 1e-12)
        if np.count_nonzero(w) < 3:
            continue
        osc = float(np.max(u[:, w].max(axis=1) - u[:, w].min(axis=1)))
        if osc <= 0:
            continue
        logs_r.append(np.log(r))
        logs_o.append(np.log(osc))
    if len(logs_r) < 3:
        raise ValueError("fewer than 3 usable radii")
    slope, _ = np.polyfit(logs_r, logs_o, 1)
    return float(slope)


def interface_point(field: Field) -> int:
    """Interior trace node minimizing ``max_i u_i``.

    Discrete stand-in for a free-boundary point when no node falls below
    the free-boundary threshold (finite beta leaves a thin overlap layer).
    """
    m = field.trace().max(axis=0)
    return int(np.argmin(m[1:-1])) + 1


@dataclass
class DiagnosticsReport:
    holder: Dict[str, float] = dc_field(default_factory=dict)
    overlaps: Optional[np.ndarray] = None
    reflection: Optional[float] = None
    system_residual: Optional[np.ndarray] = None
    free_boundary: Optional[np.ndarray] = None
    exponents: Dict[str, float] = dc_field(default_factory=dict)
    radial: Dict[str, RadialProfile] = dc_field(default_factory=dict)
