"""
Partition exponents on the half circle
======================================

The homogeneity of a blow-up limit is ``gamma(lambda_1)`` of its angular
support, with ``lambda_1`` the first eigenvalue of the weighted problem
``-(sin^a u')' = lambda sin^a u`` on an arc.  Two arcs that split the
half circle give the exponent ``mu``; arcs that may overlap away from the
equator give ``nu``.
"""

import math

from fraclap.spherical import (
    ArcSpec,
    arc_eigenvalue,
    exponent_table,
    gamma_char,
    lambda2_halfsphere,
)

# %%
# Closed forms at ``a = 0``: ``cos(theta)`` on a quarter circle and
# ``sin(theta)`` on the half circle with Dirichlet ends.
print("quarter arc:", arc_eigenvalue(ArcSpec(0, math.pi / 2), 0.0, 2048))
print("half arc, Dirichlet:", arc_eigenvalue(ArcSpec(0, math.pi, True, True), 0.0, 2048))

# %%
# The second eigenvalue of the whole half circle is ``1 + a``, so its
# homogeneity is exactly one.
for a in (-0.5, 0.0, 0.5):
    lam = lambda2_halfsphere(a)
    print(f"a={a:+.1f}: lambda_2={lam:.6f}, gamma={gamma_char(lam, (1 - a) / 2):.6f}")

# %%
# Exponents across ``s``.
print("   s      nu        mu     theta*")
for s, nu, mu, th in exponent_table([0.25, 0.5, 0.75]):
    print(f"{s:5.2f}  {nu:.5f}  {mu:.5f}  {th:.4f}")
