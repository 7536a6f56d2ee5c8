"""
Solving the weighted extension problem
======================================

The fractional Laplacian of order ``s`` on the line is the conormal
derivative of the ``L_a``-harmonic extension to the upper half plane,
``a = 1 - 2s``.  The profile ``y^(2s)`` is the simplest nontrivial
extension: its conormal derivative is the constant ``-2s``.
"""

import numpy as np

from fraclap import BoundaryData, ProblemParams, ReactionSpec, build_grid, solve_system
from fraclap.solver import conormal_trace

# %%
# One density, boundary flux ``f = -2s`` and Dirichlet data ``y^(2s)`` on the
# sides and the top.  The y-direction is graded towards the boundary, where
# the weight ``y^a`` degenerates or blows up.
for s in (0.25, 0.5, 0.75):
    prm = ProblemParams(s=s, reactions=[ReactionSpec.constant(-2 * s)])
    grid = build_grid(-1.0, 1.0, 1.0, 65, 33, prm.a)
    data = BoundaryData.from_functions(grid, [lambda X, Y: Y ** (2 * s)])
    field, report = solve_system(prm, grid, data)
    X, Y = grid.meshgrid()
    err = np.abs(field.values[0] - Y ** (2 * s)).max()
    print(f"s={s}: {report.iterations} sweeps, sup error {err:.1e}, "
          f"conormal in [{conormal_trace(field, 0).min():+.6f}, {conormal_trace(field, 0).max():+.6f}]")

# %%
# The y-fluxes are integrated exactly against the weight, so ``y^(2s)`` is
# reproduced to round-off.  A second-order error appears as soon as the
# solution varies in ``x``.  With ``phi(y) = Gamma(1-s) (y/2)^s I_{-s}(y)``
# the function ``cos(x) phi(y)`` is ``L_a``-harmonic with zero conormal.
from scipy.special import iv, gamma

s = 0.5
prm = ProblemParams(s=s, reactions=[ReactionSpec.constant(-2 * s)])
phi = lambda y: gamma(1 - s) * np.where(y > 0, (y / 2) ** s * iv(-s, np.maximum(y, 1e-300)), 1 / gamma(1 - s))
exact = lambda X, Y: 2 + Y ** (2 * s) + np.cos(X) * phi(Y)
for n in (17, 33, 65, 129):
    grid = build_grid(-1, 1, 1, n, (n + 1) // 2, prm.a)
    field, _ = solve_system(prm, grid, BoundaryData.from_functions(grid, [exact]))
    X, Y = grid.meshgrid()
    print(f"{n:4d} x {(n + 1) // 2:3d}: sup error {np.abs(field.values[0] - exact(X, Y)).max():.2e}")
