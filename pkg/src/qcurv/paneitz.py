"""The dimension-4 Paneitz operator and Q-curvature on product backgrounds.

Conventions (fixed once, used everywhere)::

    Delta = delta d                         (nonnegative spectrum)
    P     = Delta^2 + delta((2/3) R g - 2 Ric) d
    Q     = (1/6) (Delta R + R^2 - 3 |Ric|^2)

so that ``Q(S^4) = 6``, ``P(S^4) = Delta (Delta + 2)`` and, for
``g_hat = e^{2 omega} g``::

    P_hat = e^{-4 omega} P,        Q_hat = e^{-4 omega} (Q + P omega).

On a product of constant-curvature surfaces ``Ric = (R_i / 2) g_i`` on each
block, so ``P`` is diagonal in the product eigenbasis with symbol
``(mu + nu)^2 + c1 mu + c2 nu``, ``c_i = (2/3)(R1 + R2) - R_i``.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SectorMismatch, SectorTooLarge
from .fields import ConformalFactor, ScalarField, Sector, make_sector, synthesize_coeffs
from .geometry import CurvatureData, ProductManifold, curvature_scalars

CONVENTIONS = (
    "Delta=delta d (nonnegative); "
    "P=Delta^2+delta((2/3)R g-2Ric)d; "
    "Q=(1/6)(Delta R+R^2-3|Ric|^2); "
    "Q_hat=e^{-4w}(Q+P w); P_hat=e^{-4w}P; mu_hat=e^{4w}mu"
)
CONVENTIONS_HASH = hashlib.sha256(CONVENTIONS.encode()).hexdigest()[:16]

BACKGROUND = "background"
MAX_DENSE_MODES = 3000


def paneitz_coefficients(curv: CurvatureData) -> tuple[float, float]:
    R = curv.R1 + curv.R2
    return (2.0 / 3.0 * R - curv.R1, 2.0 / 3.0 * R - curv.R2)


def q_curvature_formula(scalar: float, ricci_norm_sq: float, lap_scalar: float = 0.0) -> float:
    return (lap_scalar + scalar**2 - 3.0 * ricci_norm_sq) / 6.0


def paneitz_symbol(mu, nu, c1: float, c2: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)[:, None]
    nu = np.asarray(nu, dtype=float)[None, :]
    return (mu + nu) ** 2 + c1 * mu + c2 * nu


@dataclass(frozen=True, eq=False)
class PaneitzOperator:
    """``P`` for the metric ``e^{2 omega} g_background`` (``omega=None``: background).

    The background is a diagonal mode symbol. A rescaled operator acts as
    ``e^{-4 omega} P_background`` at the grid nodes, and materializes as a
    dense Galerkin pair: stiffness ``D = diag(symbol)`` (the pairing
    ``<P_hat f, h>_hat`` equals ``<P f, h>`` exactly) and mass matrix ``W``
    of the rescaled measure, so ``matrix() = W^{-1} D``.
    """

    sector: Sector
    symbol: np.ndarray
    c1: float
    c2: float
    omega: ConformalFactor | None = None

    @property
    def representation(self) -> str:
        return "ModeSymbol" if self.omega is None else "DenseMatrix"

    @property
    def metric_tag(self) -> str:
        return BACKGROUND if self.omega is None else self.omega.tag

    @property
    def is_background(self) -> bool:
        return self.omega is None

    @property
    def norm(self) -> float:
        """Operator-norm bound: ``max |symbol| * max e^{-4 omega}``."""
        top = float(np.abs(self.symbol).max())
        if self.omega is None:
            return top
        return top * float(self.omega.exp_minus4.max())

    def background(self) -> "PaneitzOperator":
        return PaneitzOperator(self.sector, self.symbol, self.c1, self.c2)

    def _check(self, f: ScalarField):
        if f.sector != self.sector:
            raise SectorMismatch("field and operator live in different sectors")

    def apply_background(self, f: ScalarField) -> ScalarField:
        self._check(f)
        return ScalarField(self.sector, self.symbol * f.coeffs)

    def apply_values(self, f: ScalarField) -> np.ndarray:
        """Exact node values of ``P f`` (spectral part of ``f``)."""
        values = synthesize_coeffs(self.symbol * f.coeffs, self.sector)
        if self.omega is not None:
            values = values * self.omega.exp_minus4
        return values

    def apply(self, f: ScalarField) -> ScalarField:
        self._check(f)
        if self.omega is None:
            return self.apply_background(f)
        return ScalarField.from_values(self.sector, self.apply_values(f))

    # dense representation
    def _require_dense(self):
        n = self.sector.n_modes
        if n > MAX_DENSE_MODES:
            raise SectorTooLarge(
                f"dense assembly over {n} modes exceeds {MAX_DENSE_MODES}; lower the truncation "
                "or use the factor1 sector"
            )

    def stiffness(self) -> np.ndarray:
        self._require_dense()
        return np.diag(self.symbol.ravel())

    def mass(self) -> np.ndarray:
        self._require_dense()
        n = self.sector.n_modes
        if self.omega is None:
            return np.eye(n)
        B = np.kron(self.sector.basis1.synthesis, self.sector.basis2.synthesis)
        w = self.omega.weights().ravel()
        return B.T @ (w[:, None] * B)

    def matrix(self) -> np.ndarray:
        """Dense matrix acting on coefficient vectors (row-major ``coeffs.ravel()``)."""
        D = self.stiffness()
        if self.omega is None:
            return D
        return np.linalg.solve(self.mass(), D)

    def eigenvalues(self) -> np.ndarray:
        if self.omega is None:
            return np.sort(self.symbol.ravel())
        from scipy.linalg import eigh

        return eigh(self.stiffness(), self.mass(), eigvals_only=True)


def assemble_background(m: ProductManifold, sector: Sector | str = "full") -> PaneitzOperator:
    if not isinstance(sector, Sector):
        sector = make_sector(m, sector)
    elif sector.manifold != m:
        raise SectorMismatch("sector belongs to a different manifold")
    c1, c2 = paneitz_coefficients(curvature_scalars(m))
    return PaneitzOperator(sector, paneitz_symbol(sector.mu, sector.nu, c1, c2), c1, c2)


def conformal_paneitz(p: PaneitzOperator, omega: ConformalFactor) -> PaneitzOperator:
    """Operator of ``e^{2 omega} g`` where ``g`` is the metric of ``p``."""
    if omega.sector != p.sector:
        raise SectorMismatch("conformal factor lives in a different sector")
    total = omega if p.omega is None else p.omega.compose(omega)
    return PaneitzOperator(p.sector, p.symbol, p.c1, p.c2, total)


@dataclass(frozen=True, eq=False)
class QField:
    """Q-curvature of ``e^{2 omega} g_background``; node values are authoritative."""

    q: ScalarField
    omega: ConformalFactor | None = None

    @property
    def sector(self) -> Sector:
        return self.q.sector

    @property
    def metric_tag(self) -> str:
        return BACKGROUND if self.omega is None else self.omega.tag

    def values(self) -> np.ndarray:
        return self.q.values()

    def sup_norm(self) -> float:
        if not self.sector.grid_backed:
            return abs(self.q.coeffs[0, 0]) / np.sqrt(self.sector.volume)
        return float(np.abs(self.values()).max())


def q_background(m: ProductManifold, sector: Sector | str = "full") -> QField:
    if not isinstance(sector, Sector):
        sector = make_sector(m, sector)
    curv = curvature_scalars(m)
    value = q_curvature_formula(curv.R, curv.ricci_norm_sq)
    f = ScalarField.constant(sector, value)
    if sector.grid_backed:
        f = ScalarField(sector, f.coeffs, grid=np.full(sector.grid_shape, value))
    return QField(f)


def q_transform(qg: QField, omega: ConformalFactor, p: PaneitzOperator) -> QField:
    """``Q`` of ``e^{2 omega} g`` from ``Q^g`` and ``P^g``."""
    if qg.metric_tag != p.metric_tag:
        raise SectorMismatch(f"Q is tagged {qg.metric_tag} but P is tagged {p.metric_tag}")
    if omega.sector != qg.sector or p.sector != qg.sector:
        raise SectorMismatch("Q, P and omega must share a sector")
    values = omega.exp_minus4 * (qg.values() + p.apply_values(omega.omega))
    total = omega if qg.omega is None else qg.omega.compose(omega)
    return QField(ScalarField.from_values(qg.sector, values), total)


def operator_to_csv(p: PaneitzOperator, path: str | Path):
    """Dense matrix with a commented header naming metric, sector and truncation."""
    M = p.matrix()
    m = p.sector.manifold
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# metric_tag={p.metric_tag}\n")
        fh.write(f"# sector={p.sector.label}\n")
        fh.write(f"# truncation={m.resolution[0]},{m.resolution[1]}\n")
        fh.write(f"# conventions={CONVENTIONS_HASH}\n")
        w = csv.writer(fh)
        for row in M:
            w.writerow([repr(float(x)) for x in row])


def operator_from_csv(path: str | Path) -> tuple[dict, np.ndarray]:
    header, rows = {}, []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
            elif line.strip():
                rows.append([float(x) for x in line.strip().split(",")])
    return header, np.array(rows)
