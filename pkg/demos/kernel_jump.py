"""
Watching the Paneitz kernel jump
================================

On S^2(a) x (hyperbolic surface) the null space of the Paneitz operator is
just the constants, except at one radius where the first spherical
harmonics drop in as well.
"""

from qcurv import assemble_background, sphere_hyperbolic, kernel_basis, scan_parameter

# the background at a = 1, restricted to functions constant on the surface
p = assemble_background(sphere_hyperbolic(), "factor1")
kb = kernel_basis(p)
print(f"a = 1: dim N(P) = {kb.dim}, gap = {kb.gap:g}, status = {kb.status}")
print("why only a sector is needed:", kb.proof_note["statement"])

# sweep the sphere radius and look for the crossing
res = scan_parameter(sphere_hyperbolic(), 1, "radius", 0.8, 1.2, 41)
for a, dim, smallest in res.table():
    marker = "  <--" if dim > 1 else ""
    print(f"a = {a:.3f}  dim = {dim}  min|lambda| = {smallest:9.3e}{marker}")
for b in res.brackets:
    print(f"dim {b['dim_lo']} -> {b['dim_hi']} between a = {b['lo']:.3f} and {b['hi']:.3f}")
