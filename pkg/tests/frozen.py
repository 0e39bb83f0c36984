"""Reference values, frozen.

Each entry was produced by an independent oracle in ``oracles.py``
(coordinate finite differences or adaptive quadrature) and agrees with the
closed form written here; ``test_oracles.py`` re-derives them.
"""

import math

PI2 = math.pi**2

# (R, |Ric|^2) for unit factors; chart point (1.1, 0.3, 0.7, 1.9)
CURVATURE = {
    "s2s2": (4.0, 4.0),
    "s2t2": (2.0, 2.0),
    "s2h2": (0.0, 4.0),
    "t4": (0.0, 0.0),
}

Q_CONSTANT = {"s2s2": 2.0 / 3.0, "s2t2": -1.0 / 3.0, "s2h2": -2.0, "t4": 0.0, "s4": 6.0}

VOLUME = {"s2s2": 16 * PI2, "s2t2": 16 * math.pi**3, "s2h2": 16 * PI2, "t4": 16 * PI2**2}

K_Q = {
    "s2s2": 32 * PI2 / 3,
    "s2t2": -16 * math.pi**3 / 3,
    "s2h2": -32 * PI2,
    "t4": 0.0,
}

# Paneitz eigenvalue of the named product mode (sphere degree l, second factor mode)
SYMBOL = {
    ("s2t2", 1, "const"): 8.0 / 3.0,
    ("s2t2", 2, "const"): 32.0,
    ("s2t2", 1, "cos x"): 9.0,
    ("s2t2", 0, "cos x"): 7.0 / 3.0,
    ("s2h2", 1, "const"): 0.0,
    ("s2h2", 2, "const"): 24.0,
    ("s2s2", 1, "const"): 16.0 / 3.0,
    ("s2s2", 2, "const"): 40.0,
}

# int_{S^2(1)} cos(theta)^4 dA
SPHERE_COS4 = 4 * math.pi / 5
