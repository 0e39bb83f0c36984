"""
Splitting N(P) into constants and N(Q)
======================================

When k_Q is nonzero every u in N(P) splits as u0 + u1 with u0 = Q(u)/k_Q.
For a constant-Q metric u0 is just the mean of u.
"""

import numpy as np

from qcurv import build_context, decompose, sphere_hyperbolic, hodge_compare, random_conformal_factor

ctx = build_context(sphere_hyperbolic(), "factor1")
rng = np.random.default_rng(0)
u = sum(c * f for c, f in zip(rng.standard_normal(4), ctx.kernel.fields))

dec = decompose(ctx, u)
cmp = hodge_compare(ctx, u)
print(f"u0 = {dec.u0:.12f}, mean of u = {cmp.mean:.12f}")

# after a conformal change Q is no longer constant, yet u0 stays put
for seed in range(3):
    other = ctx.rescaled(random_conformal_factor(ctx.sector, seed))
    print(f"seed {seed}: u0 = {decompose(other, u).u0:.12f}")
