"""Certified null spaces of the Paneitz operator and parameter scans.

A kernel is only reported when the zero threshold ``tol * ||P||`` sits well
below the first retained eigenvalue (``gap_ratio``, default 1e3); otherwise
:class:`~qcurv.errors.IndeterminateGap` is raised instead of guessing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh

from .errors import IndeterminateGap, StabilityViolation
from .fields import FACTOR1, ConformalFactor, ScalarField, inner_product, metric_weights
from .geometry import HYPERBOLIC, SPHERE, TORUS, ProductManifold
from .paneitz import PaneitzOperator, assemble_background, conformal_paneitz

DEFAULT_TOL = 1e-9
DEFAULT_GAP_RATIO = 1e3


@dataclass(frozen=True)
class KernelBasis:
    """Orthonormal (background inner product) basis of N(P); constant first."""

    fields: tuple[ScalarField, ...]
    tol: float
    gap: float
    norm: float
    threshold: float
    status: str = "certified"
    proof_note: dict | None = None

    @property
    def dim(self) -> int:
        return len(self.fields)

    @property
    def sector(self):
        return self.fields[0].sector

    def coefficient_matrix(self) -> np.ndarray:
        """Rows are the flattened coefficient vectors of the basis fields."""
        return np.array([f.flat for f in self.fields])


def _sector_is_partial(p: PaneitzOperator) -> bool:
    s = p.sector
    f2 = s.manifold.factor2
    return s.label == FACTOR1 or (f2.kind == HYPERBOLIC and f2.spectrum is None)


def _constant_first(K: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning ``K``'s row space with the constant mode first."""
    d = K.shape[0]
    e0 = np.zeros(K.shape[1])
    e0[0] = 1.0
    rest = K - np.outer(K @ e0, e0)
    if d == 1:
        return e0[None, :]
    u, s, vt = np.linalg.svd(rest, full_matrices=False)
    return np.vstack([e0, vt[: d - 1]])


def kernel_basis(p: PaneitzOperator, tol: float = DEFAULT_TOL, gap_ratio: float = DEFAULT_GAP_RATIO) -> KernelBasis:
    """Zero modes of ``p``: eigenvalues with ``|lambda| <= tol * ||P||``.

    Background operators are read off the mode symbol; rescaled operators are
    solved as the generalized symmetric problem ``D v = lambda W v``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    sector = p.sector
    norm = p.norm
    threshold = tol * norm
    if p.omega is None:
        lam = p.symbol.ravel()
        zero = np.abs(lam) <= threshold
        idx = np.flatnonzero(zero)
        K = np.zeros((idx.size, sector.n_modes))
        K[np.arange(idx.size), idx] = 1.0
    else:
        lam, vecs = eigh(p.stiffness(), p.mass())
        zero = np.abs(lam) <= threshold
        K = vecs[:, zero].T
        # rescale to unit background norm before re-orthonormalizing
        K = np.linalg.qr(K.T)[0].T if K.size else K
    nonzero = np.abs(lam[~zero])
    gap = float(nonzero.min()) if nonzero.size else math.inf
    if gap < gap_ratio * threshold:
        raise IndeterminateGap(gap, threshold, gap_ratio)
    if K.shape[0] == 0 or abs(np.linalg.norm(K[:, 0])) < 1 - 1e-8:
        raise StabilityViolation("constants are missing from the computed kernel")
    rows = _constant_first(K)
    fields = tuple(ScalarField(sector, r.reshape(sector.shape)) for r in rows)
    status, note = "certified", None
    if _sector_is_partial(p):
        status = "sector-certified"
        note = positivity_note(sector.manifold)
    return KernelBasis(fields, tol, gap, norm, threshold, status, note)


def _factor1_low_spectrum(m: ProductManifold, bound: float) -> list[float] | None:
    """Every factor-1 eigenvalue below ``bound`` (None if unknown)."""
    f1 = m.factor1
    if f1.kind == SPHERE:
        out, l = [], 0
        while l * (l + 1) / f1.radius**2 < bound:
            out.append(l * (l + 1) / f1.radius**2)
            l += 1
        return out
    if f1.kind == TORUS:
        L1, L2 = f1.periods
        kmax1 = int(math.ceil(math.sqrt(max(bound, 0.0)) * L1 / (2 * math.pi))) + 1
        kmax2 = int(math.ceil(math.sqrt(max(bound, 0.0)) * L2 / (2 * math.pi))) + 1
        vals = {
            (2 * math.pi * a / L1) ** 2 + (2 * math.pi * b / L2) ** 2
            for a in range(kmax1 + 1)
            for b in range(kmax2 + 1)
        }
        return sorted(v for v in vals if v < bound)
    return None


def positivity_note(m: ProductManifold) -> dict:
    """Check ``lambda(mu, nu) > 0`` for every factor-1 eigenvalue ``mu`` and every ``nu > 0``.

    ``lambda(mu, nu) = lambda(mu, 0) + nu (2 mu + c2) + nu^2``, so any ``mu``
    with ``mu >= -c1`` and ``2 mu + c2 >= 0`` is settled; the finitely many
    smaller eigenvalues are checked by minimizing the quadratic in ``nu``.
    When the check passes, modes that vary along factor 2 add nothing to the
    kernel whatever the factor-2 spectrum is.
    """
    from .geometry import curvature_scalars
    from .paneitz import paneitz_coefficients

    c1, c2 = paneitz_coefficients(curvature_scalars(m))
    bound = max(-c1, -c2 / 2.0, 0.0)
    low = _factor1_low_spectrum(m, bound)
    if low is None:
        return {"holds": False, "reason": "factor-1 spectrum unknown", "c1": c1, "c2": c2}
    failures = []
    for mu in low:
        at0 = mu * mu + c1 * mu
        slope = 2.0 * mu + c2
        if slope >= 0.0:
            ok = at0 >= 0.0
        else:
            ok = at0 - slope * slope / 4.0 > 0.0
        if not ok:
            failures.append(mu)
    return {
        "holds": not failures,
        "c1": c1,
        "c2": c2,
        "threshold_mu": bound,
        "checked_mu": low,
        "failing_mu": failures,
        "statement": "lambda(mu,nu) > 0 for all factor-1 eigenvalues mu and all nu > 0",
    }


@dataclass(frozen=True)
class StabilityReport:
    residual: float
    dim_background: int
    dim_rescaled: int
    limit: float
    passed: bool


def check_conformal_stability(b: KernelBasis, p_background: PaneitzOperator, omega: ConformalFactor) -> StabilityReport:
    """Verify that ``b`` is also the kernel of the operator of ``e^{2 omega} g``."""
    p_hat = conformal_paneitz(p_background, omega)
    w_hat = metric_weights(p_hat.sector, p_hat.omega)
    residual = 0.0
    for u in b.fields:
        pu = ScalarField(u.sector, np.zeros(u.sector.shape), grid=p_hat.apply_values(u))
        num = math.sqrt(inner_product(pu, pu, w_hat))
        den = math.sqrt(inner_product(u, u, w_hat))
        residual = max(residual, num / (p_hat.norm * den))
    limit = 10.0 * b.tol
    dim_hat = kernel_basis(p_hat, b.tol).dim
    passed = residual <= limit and dim_hat == b.dim
    if not passed:
        raise StabilityViolation(
            f"kernel not conformally stable: residual {residual:.3e} (limit {limit:.1e}), "
            f"dim {b.dim} -> {dim_hat}"
        )
    return StabilityReport(residual, b.dim, dim_hat, limit, passed)


@dataclass(frozen=True)
class ScanStep:
    param: float
    dim: int
    min_abs_lambda: float
    signed_lambda: float
    norm: float
    certified: bool


@dataclass(frozen=True)
class ScanResult:
    factor: int
    parameter: str
    steps: list[ScanStep]
    brackets: list[dict] = field(default_factory=list)

    def table(self) -> list[tuple[float, int, float]]:
        return [(s.param, s.dim, s.min_abs_lambda) for s in self.steps]


_PARAMS = {SPHERE: ("radius",), TORUS: ("period1", "period2", "periods"), HYPERBOLIC: ("scale",)}


def _vary(m: ProductManifold, factor: int, parameter: str, value: float) -> ProductManifold:
    fac = m.factors[factor - 1]
    if parameter not in _PARAMS[fac.kind]:
        raise ValueError(f"{fac.kind} has no scan parameter {parameter!r}; choose from {_PARAMS[fac.kind]}")
    if parameter == "radius":
        new = replace(fac, radius=float(value))
    elif parameter == "scale":
        new = replace(fac, scale=float(value))
    elif parameter == "period1":
        new = replace(fac, periods=(float(value), fac.periods[1]))
    elif parameter == "period2":
        new = replace(fac, periods=(fac.periods[0], float(value)))
    else:
        new = replace(fac, periods=(float(value), float(value)))
    return m.with_factor(factor, new)


def _scan_step(m: ProductManifold, sector: str, tol: float, gap_ratio: float, value: float) -> ScanStep:
    p = assemble_background(m, sector)
    lam = p.symbol.ravel()
    norm = p.norm
    zero = np.abs(lam) <= tol * norm
    rest = lam[1:]  # drop the constant mode, always zero
    k = int(np.argmin(np.abs(rest)))
    nonzero = np.abs(lam[~zero])
    gap = nonzero.min() if nonzero.size else math.inf
    return ScanStep(
        param=float(value),
        dim=int(zero.sum()),
        min_abs_lambda=float(abs(rest[k])),
        signed_lambda=float(rest[k]),
        norm=float(norm),
        certified=bool(gap >= gap_ratio * tol * norm),
    )


def scan_parameter(
    base: ProductManifold,
    factor: int,
    parameter: str,
    start: float,
    stop: float,
    steps: int,
    sector: str = "factor1",
    tol: float = DEFAULT_TOL,
    gap_ratio: float = DEFAULT_GAP_RATIO,
    workers: int | None = None,
) -> ScanResult:
    """Kernel dimension of the background symbol along a one-parameter family.

    ``min_abs_lambda`` is the smallest ``|lambda|`` over non-constant modes.
    Brackets mark adjacent steps between which the dimension changes or that
    smallest eigenvalue changes sign; no crossing point is interpolated.
    Steps whose threshold and gap are too close are kept but marked
    ``certified=False``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    values = np.linspace(start, stop, steps)
    manifolds = [_vary(base, factor, parameter, v) for v in values]

    def run(i):
        return _scan_step(manifolds[i], sector, tol, gap_ratio, values[i])

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, range(steps)))
    else:
        out = [run(i) for i in range(steps)]

    brackets = []
    for a, b in zip(out, out[1:]):
        sign_flip = np.sign(a.signed_lambda) != np.sign(b.signed_lambda)
        if a.dim != b.dim or sign_flip:
            brackets.append({
                "lo": a.param,
                "hi": b.param,
                "dim_lo": a.dim,
                "dim_hi": b.dim,
                "sign_change": bool(sign_flip),
            })
    return ScanResult(factor, parameter, out, brackets)
