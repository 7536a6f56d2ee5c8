"""
Barriers for the absorption problem
===================================

With boundary absorption ``-M v^p`` a single density should be of order
``M^(-1/p)`` well inside the unit half disc.  This script evaluates the
explicit barrier ``g_M`` and its extension ``w_delta``, then measures
both sides of the decay estimate on computed solutions.
"""

import numpy as np

from fraclap.barriers import (
    BarrierParams,
    barrier_f,
    barrier_gM,
    decay_check,
    solve_decay_scenario,
    supersolution_wdelta,
)

# %%
# ``f`` rises from 0 to 1 with algebraic tails.  ``g_M`` is a well of width
# about 2 whose depth shrinks as ``M`` grows.
bp = BarrierParams(a=0.0, p=1.0, M=100.0, delta=0.05)
print("f(-10, 0, 10):", barrier_f(np.array([-10.0, 0.0, 10.0]), bp).round(5).tolist())
print("g_M(0, 0.5, 1, 2):", barrier_gM(np.array([0.0, 0.5, 1.0, 2.0]), bp).round(5).tolist())
for y in (1.0, 0.1, 0.01):
    print(f"w_delta(0, {y}) = {supersolution_wdelta(0.0, y, bp):.5f}")

# %%
# Decay check on ``[-1, 1] x [0, 1]`` with unit Dirichlet data.  The margin is
# right-hand side minus left-hand side, so negative means the estimate
# with constant one does not hold at this scale.
print("   M     p     s      lhs        rhs       margin")
for M in (10.0, 1000.0):
    for p in (1.0, 2.0):
        for s in (0.25, 0.5, 0.75):
            fld, _ = solve_decay_scenario(s, p, M)
            r = decay_check(fld, 0.0)
            print(f"{M:6.0f}  {p:3.1f}  {s:4.2f}  {r.lhs:.3e}  {r.rhs:.3e}  {r.margin:+.3e}")
