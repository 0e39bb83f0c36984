"""
Functions that are never Q-curvature
====================================

Any nonzero element of N(Q) is a forbidden Q-curvature, and so are its odd
powers. Positive functions are ruled out when the total Q is negative.
"""

import numpy as np

from qcurv import ScalarField, build_context, sphere_hyperbolic, forbidden_certificate, forbidden_family
from qcurv.fields import odd_power

ctx = build_context(sphere_hyperbolic(), "factor1")
y = ScalarField.mode(ctx.sector, (1, 0))

candidates = {
    "Y_1^0": y,
    "(Y_1^0)^3": odd_power(y, 3),
    "exp(4 Y_1^0)": ScalarField.from_values(ctx.sector, np.exp(4 * y.values())),
    "Y_2^0": ScalarField.mode(ctx.sector, (2, 0)),
}
for name, f in candidates.items():
    cert = forbidden_certificate(ctx, f)
    print(f"{name:>13}: {cert.verdict.value:<13} excludes: {cert.excludes}")

# u, u^3, u^5 span a three-dimensional family of forbidden functions
fam = forbidden_family(ctx, y)
print("Gram singular values:", np.array2string(fam.singular_values, precision=3), "rank", fam.rank)
