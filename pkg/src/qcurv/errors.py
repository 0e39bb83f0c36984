"""Exception types raised across the package.

Errors that carry mathematical meaning (a theorem fired, an obstruction was
found) are kept apart from plain usage errors so callers and the command
line front end can tell them apart.
"""

from __future__ import annotations

import numpy as np


class QCurvError(Exception):
    """Base class for every error raised by :mod:`qcurv`."""


class ConfigError(QCurvError, ValueError):
    """A manifold or experiment configuration could not be parsed or validated."""


class AbstractFactorNotGridBacked(QCurvError):
    """A grid operation was requested on a factor that has no grid."""


class SectorMismatch(QCurvError, ValueError):
    pass


class AliasingExceeded(QCurvError):
    def __init__(self, residual: float, limit: float, what: str = "field"):
        self.residual = residual
        self.limit = limit
        super().__init__(
            f"{what}: aliasing residual {residual:.3e} exceeds {limit:.1e}; "
            "raise the truncation or lower the bandlimit"
        )


class SectorTooLarge(QCurvError):
    pass


class IndeterminateGap(QCurvError):
    """The zero threshold and the first retained eigenvalue are too close to call."""

    def __init__(self, gap: float, threshold: float, ratio: float):
        self.gap = gap
        self.threshold = threshold
        self.ratio = ratio
        super().__init__(
            f"spectral gap {gap:.3e} is only {gap / threshold if threshold else float('inf'):.3g}x "
            f"the zero threshold {threshold:.3e} (need {ratio:g}x)"
        )


class StabilityViolation(QCurvError):
    """Kernel changed under a conformal rescaling; indicates a discretization bug."""


class NotInKernel(QCurvError, ValueError):
    pass


class KQZero(QCurvError):
    """Total Q-curvature vanishes, so the constant/N(Q) splitting is unavailable."""


class NotConstantQ(QCurvError):
    pass


class ConstantInput(QCurvError, ValueError):
    pass


class SignMismatch(QCurvError, ValueError):
    pass


class FredholmViolation(QCurvError):
    """The right hand side is not orthogonal to the kernel of P.

    ``integrals`` holds the offending pairings and ``labels`` names the kernel
    element each one was taken against; ``scales`` are the matching
    Cauchy-Schwarz scales the tolerance was relative to.
    """

    def __init__(self, integrals, labels, scales, message: str | None = None):
        self.integrals = [float(v) for v in integrals]
        self.labels = list(labels)
        self.scales = [float(v) for v in np.broadcast_to(scales, (len(self.integrals),))]
        if message is None:
            worst = max(range(len(self.integrals)), key=lambda i: abs(self.integrals[i]))
            message = (
                f"Fredholm condition fails: integral against {self.labels[worst]} "
                f"is {self.integrals[worst]:.12g}"
            )
        super().__init__(message)


class NonConvergence(QCurvError):
    def __init__(self, message: str, trace):
        self.trace = trace
        super().__init__(message)
