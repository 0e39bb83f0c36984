"""Scalar fields on product manifolds in a dual spectral/grid representation.

Coefficients are stored as a 2-D array ``coeffs[i, j]`` over the product basis
``phi_i(factor1) * psi_j(factor2)``, so synthesis and analysis are two small
matrix products. A field may additionally carry exact node values (``grid``),
for instance the output of a nonlinear pointwise map; when present they are
authoritative for quadrature and sign tests and ``coeffs`` is their
projection onto the truncated space.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .bases import FactorBasis, factor_basis
from .errors import AbstractFactorNotGridBacked, AliasingExceeded, SectorMismatch
from .geometry import ProductManifold

FULL = "FullProduct"
FACTOR1 = "Factor1Only"
_SECTOR_ALIASES = {"full": FULL, FULL: FULL, "factor1": FACTOR1, FACTOR1: FACTOR1}

CONFORMAL_ALIASING_LIMIT = 1e-8
POINTWISE_ALIASING_LIMIT = 1e-6


@dataclass(frozen=True, eq=False)
class Sector:
    """An invariant subspace of functions: the full product, or functions
    constant along factor 2 (``Factor1Only``)."""

    label: str
    manifold: ProductManifold
    basis1: FactorBasis = field(repr=False)
    basis2: FactorBasis = field(repr=False)

    def __eq__(self, other):
        return (
            isinstance(other, Sector)
            and self.label == other.label
            and self.manifold == other.manifold
        )

    def __hash__(self):
        return hash((self.label, self.manifold))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.basis1.size, self.basis2.size)

    @property
    def n_modes(self) -> int:
        return self.basis1.size * self.basis2.size

    @property
    def grid_backed(self) -> bool:
        return self.basis1.grid_backed and self.basis2.grid_backed

    @property
    def grid_shape(self) -> tuple[int, int]:
        self.require_grid()
        return (len(self.basis1.weights), len(self.basis2.weights))

    @property
    def volume(self) -> float:
        return self.manifold.volume

    @property
    def mu(self) -> np.ndarray:
        return self.basis1.eigenvalues

    @property
    def nu(self) -> np.ndarray:
        return self.basis2.eigenvalues

    @property
    def basis_index_set(self) -> list[tuple]:
        return [(a, b) for a in self.basis1.labels for b in self.basis2.labels]

    @property
    def weights(self) -> np.ndarray:
        """Background quadrature weights on the grid, shape ``grid_shape``."""
        self.require_grid()
        return np.outer(self.basis1.weights, self.basis2.weights)

    def require_grid(self):
        if not self.grid_backed:
            raise AbstractFactorNotGridBacked(
                f"sector {self.label} of {self.manifold.factor2.kind} factor has no grid"
            )

    def mode_index(self, label1, label2=None) -> tuple[int, int]:
        i = self.basis1.index(label1)
        j = 0 if label2 is None else self.basis2.index(label2)
        return i, j

    def degree_mask(self, bandlimit: tuple[int, int]) -> np.ndarray:
        return (self.basis1.degree[:, None] <= bandlimit[0]) & (self.basis2.degree[None, :] <= bandlimit[1])

    def describe(self) -> dict:
        return {"label": self.label, "shape": list(self.shape), "grid_backed": self.grid_backed}


@lru_cache(maxsize=64)
def _make_sector(manifold: ProductManifold, label: str) -> Sector:
    b1 = factor_basis(manifold.factor1, manifold.resolution[0])
    b2 = factor_basis(manifold.factor2, manifold.resolution[1], constant_only=(label == FACTOR1))
    return Sector(label, manifold, b1, b2)


def make_sector(manifold: ProductManifold, label: str = "full") -> Sector:
    try:
        label = _SECTOR_ALIASES[label]
    except KeyError:
        raise ValueError(f"unknown sector {label!r}; expected 'full' or 'factor1'") from None
    return _make_sector(manifold, label)


@dataclass(frozen=True, eq=False)
class ScalarField:
    sector: Sector
    coeffs: np.ndarray
    grid: np.ndarray | None = None
    aliasing: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != self.sector.shape:
            raise SectorMismatch(f"coefficient shape {coeffs.shape} != sector shape {self.sector.shape}")
        object.__setattr__(self, "coeffs", coeffs)
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.shape != self.sector.grid_shape:
                raise SectorMismatch(f"grid shape {grid.shape} != sector grid {self.sector.grid_shape}")
            object.__setattr__(self, "grid", grid)

    # constructors
    @classmethod
    def zeros(cls, sector: Sector) -> "ScalarField":
        return cls(sector, np.zeros(sector.shape))

    @classmethod
    def constant(cls, sector: Sector, value: float = 1.0) -> "ScalarField":
        c = np.zeros(sector.shape)
        c[0, 0] = value * math.sqrt(sector.volume)
        return cls(sector, c)

    @classmethod
    def mode(cls, sector: Sector, label1, label2=None, amplitude: float = 1.0) -> "ScalarField":
        """A single basis function, e.g. ``ScalarField.mode(s, (1, 0))`` for Y_1^0 x const."""
        c = np.zeros(sector.shape)
        c[sector.mode_index(label1, label2)] = amplitude
        return cls(sector, c)

    @classmethod
    def from_values(cls, sector: Sector, values: np.ndarray) -> "ScalarField":
        """Analyze node values; the values are kept as the authoritative grid."""
        values = np.asarray(values, dtype=float)
        coeffs = analyze(values, sector)
        residual = _relative_residual(values, synthesize_coeffs(coeffs, sector))
        return cls(sector, coeffs, grid=values, aliasing=residual)

    # views
    def values(self) -> np.ndarray:
        if self.grid is not None:
            return self.grid
        return synthesize_coeffs(self.coeffs, self.sector)

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def coeff_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def is_constant(self, rtol: float = 1e-12) -> bool:
        rest = self.coeffs.copy()
        rest[0, 0] = 0.0
        scale = max(self.coeff_norm(), np.finfo(float).tiny)
        if np.linalg.norm(rest) > rtol * scale:
            return False
        if self.grid is not None:
            v = self.grid
            return bool(np.ptp(v) <= rtol * max(np.abs(v).max(), np.finfo(float).tiny))
        return True

    def bandlimited(self) -> "ScalarField":
        """Drop the stored grid, keeping only the spectral part."""
        return ScalarField(self.sector, self.coeffs)

    def fingerprint(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.coeffs).tobytes()).hexdigest()[:12]

    # arithmetic; any stored grid is carried along
    def _combine(self, other: "ScalarField", sign: float) -> "ScalarField":
        if not isinstance(other, ScalarField):
            return NotImplemented
        _check_same(self, other)
        grid = None
        if self.grid is not None or other.grid is not None:
            grid = self.values() + sign * other.values()
        return ScalarField(self.sector, self.coeffs + sign * other.coeffs, grid,
                           max(self.aliasing, other.aliasing))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self + ScalarField.constant(self.sector, float(other))
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-float(other))
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, ScalarField):
            raise TypeError("use pointwise_map or multiply() for products of fields")
        scalar = float(scalar)
        grid = None if self.grid is None else scalar * self.grid
        return ScalarField(self.sector, scalar * self.coeffs, grid, self.aliasing)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __neg__(self):
        return self * -1.0


def _check_same(f: ScalarField, h: ScalarField):
    if f.sector != h.sector:
        raise SectorMismatch(f"fields live in different sectors: {f.sector.label} vs {h.sector.label}")


def _relative_residual(values: np.ndarray, approx: np.ndarray) -> float:
    scale = np.abs(values).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(values - approx).max() / scale)


def synthesize_coeffs(coeffs: np.ndarray, sector: Sector) -> np.ndarray:
    sector.require_grid()
    return sector.basis1.synthesis @ coeffs @ sector.basis2.synthesis.T


def synthesize(f: ScalarField) -> np.ndarray:
    """Node values of ``f``, shape ``sector.grid_shape``."""
    return f.values()


def analyze(values: np.ndarray, sector: Sector) -> np.ndarray:
    """Coefficients of the L2 projection of node values onto the sector basis."""
    sector.require_grid()
    values = np.asarray(values, dtype=float)
    if values.shape != sector.grid_shape:
        raise SectorMismatch(f"values shape {values.shape} != sector grid {sector.grid_shape}")
    b1, b2 = sector.basis1, sector.basis2
    return b1.synthesis.T @ (b1.weights[:, None] * values * b2.weights[None, :]) @ b2.synthesis


def inner_product(f: ScalarField, h: ScalarField, weights: np.ndarray | None = None) -> float:
    """``sum_nodes w f h``; ``weights`` defaults to the background measure.

    Pass ``metric_weights(sector, omega)`` to pair in the metric ``e^{2 omega} g``.
    Without a grid the background pairing is the coefficient dot product.
    """
    _check_same(f, h)
    if not f.sector.grid_backed:
        if weights is not None:
            raise AbstractFactorNotGridBacked("weighted pairing needs a grid-backed sector")
        return float(np.sum(f.coeffs * h.coeffs))
    if weights is None:
        weights = f.sector.weights
    if np.shape(weights) != f.sector.grid_shape:
        raise SectorMismatch("weights do not match the sector grid")
    return float(np.sum(weights * f.values() * h.values()))


def l2_norm(f: ScalarField, weights: np.ndarray | None = None) -> float:
    return math.sqrt(max(inner_product(f, f, weights), 0.0))


def multiply(f: ScalarField, h: ScalarField, max_aliasing: float | None = POINTWISE_ALIASING_LIMIT) -> ScalarField:
    _check_same(f, h)
    values = f.values() * h.values()
    return _from_mapped_values(f.sector, values, max_aliasing, "product")


def pointwise_map(
    f: ScalarField,
    func: Callable[[np.ndarray], np.ndarray],
    max_aliasing: float | None = POINTWISE_ALIASING_LIMIT,
) -> ScalarField:
    """Apply ``func`` at every node and re-analyze.

    The mapped node values are kept on the result, so sign properties of the
    map (``u**3``, clamping) hold exactly at the nodes. ``aliasing`` records
    how much of the result lies outside the truncated space; above
    ``max_aliasing`` an :class:`AliasingExceeded` is raised (pass ``None`` for
    deliberately non-smooth maps).
    """
    values = np.asarray(func(f.values()), dtype=float)
    return _from_mapped_values(f.sector, values, max_aliasing, "pointwise map")


def _from_mapped_values(sector, values, max_aliasing, what):
    out = ScalarField.from_values(sector, values)
    if max_aliasing is not None and out.aliasing > max_aliasing:
        raise AliasingExceeded(out.aliasing, max_aliasing, what)
    return out


def odd_power(f: ScalarField, p: int, max_aliasing: float | None = POINTWISE_ALIASING_LIMIT) -> ScalarField:
    if p < 1 or p % 2 == 0:
        raise ValueError(f"exponent must be an odd positive integer, got {p}")
    return pointwise_map(f, lambda v: v**p, max_aliasing)


# -- conformal factors ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """``omega`` for the metric ``e^{2 omega} g``.

    Node values of ``e^{+-4 omega}`` are cached; those are all the rescaled
    measure and operators ever need. ``aliasing`` is the out-of-band fraction
    of ``e^{2 omega}`` at the current truncation.
    """

    omega: ScalarField
    max_aliasing: float = CONFORMAL_ALIASING_LIMIT
    values: np.ndarray = field(init=False, repr=False)
    exp4: np.ndarray = field(init=False, repr=False)
    aliasing: float = field(init=False)

    def __post_init__(self):
        omega = self.omega
        if omega.grid is not None:
            omega = omega.bandlimited()
            object.__setattr__(self, "omega", omega)
        values = omega.values()
        e2 = np.exp(2.0 * values)
        residual = _relative_residual(e2, synthesize_coeffs(analyze(e2, omega.sector), omega.sector))
        if self.max_aliasing is not None and residual > self.max_aliasing:
            raise AliasingExceeded(residual, self.max_aliasing, "conformal factor e^(2 omega)")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "exp4", e2 * e2)
        object.__setattr__(self, "aliasing", residual)

    @property
    def sector(self) -> Sector:
        return self.omega.sector

    @property
    def exp_minus4(self) -> np.ndarray:
        return 1.0 / self.exp4

    @property
    def tag(self) -> str:
        return f"exp(2w)g[{self.omega.fingerprint()}]"

    def weights(self) -> np.ndarray:
        return self.sector.weights * self.exp4

    def compose(self, other: "ConformalFactor") -> "ConformalFactor":
        """Factor of ``e^{2 other} e^{2 self} g`` relative to ``g``."""
        return ConformalFactor(self.omega + other.omega, self.max_aliasing)


def metric_weights(sector: Sector, omega: ConformalFactor | None = None) -> np.ndarray:
    """Node weights of the Riemannian measure of ``e^{2 omega} g``."""
    if omega is None:
        return sector.weights
    if omega.sector != sector:
        raise SectorMismatch("conformal factor lives in a different sector")
    return omega.weights()


def bandlimit_for(sector: Sector, fraction: float = 1 / 3) -> tuple[int, int]:
    res = sector.manifold.resolution
    b1 = int(math.floor(res[0] * fraction))
    b2 = int(math.floor(res[1] * fraction)) if sector.label == FULL else 0
    return (b1, b2)


def random_field(
    sector: Sector,
    rng: np.random.Generator,
    bandlimit: tuple[int, int] | None = None,
    decay: float = 0.25,
) -> ScalarField:
    """Gaussian coefficients damped by ``decay**degree`` below ``bandlimit``."""
    if bandlimit is None:
        bandlimit = bandlimit_for(sector)
    mask = sector.degree_mask(bandlimit)
    damp = decay ** (sector.basis1.degree[:, None] + sector.basis2.degree[None, :])
    coeffs = rng.standard_normal(sector.shape) * damp * mask
    return ScalarField(sector, coeffs)


def random_conformal_factor(
    sector: Sector,
    seed: int | np.random.Generator,
    amplitude: float = 0.05,
    bandlimit: tuple[int, int] | None = None,
    decay: float = 0.25,
    mean_zero: bool = False,
) -> ConformalFactor:
    """A smooth random conformal factor with ``max |omega| = amplitude`` on the grid.

    The bandlimit defaults to a third of the truncation per factor so that
    ``e^{2 omega}`` stays resolved.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    f = random_field(sector, rng, bandlimit, decay)
    if mean_zero:
        c = f.coeffs.copy()
        c[0, 0] = 0.0
        f = ScalarField(sector, c)
    peak = np.abs(f.values()).max()
    if peak > 0:
        f = f * (amplitude / peak)
    return ConformalFactor(f)


# -- CSV import/export --------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _label_str(label) -> str:
    return ":".join(str(int(v)) for v in label)


def field_to_csv(f: ScalarField, path: str | Path):
    """Write ``i1, i2, label1, label2, coeff`` rows; floats round-trip exactly."""
    path = Path(path)
    s = f.sector
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i1", "i2", "label1", "label2", "coeff"])
        for i, l1 in enumerate(s.basis1.labels):
            for j, l2 in enumerate(s.basis2.labels):
                w.writerow([i, j, _label_str(l1), _label_str(l2), _fmt(f.coeffs[i, j])])


def field_from_csv(path: str | Path, sector: Sector) -> ScalarField:
    coeffs = np.zeros(sector.shape)
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                i, j = int(row["i1"]), int(row["i2"])
                coeffs[i, j] = float(row["coeff"])
            except (KeyError, ValueError, IndexError) as exc:
                raise SectorMismatch(f"{path}:{lineno}: bad coefficient row ({exc})") from None
    return ScalarField(sector, coeffs)


def grid_to_csv(f: ScalarField, path: str | Path):
    """Write ``node1, node2, x1a, x1b, x2a, x2b, value`` rows (NaN for collapsed factors)."""
    s = f.sector
    values = f.values()
    n1, n2 = s.basis1.nodes, s.basis2.nodes
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node1", "node2", "x1a", "x1b", "x2a", "x2b", "value"])
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                w.writerow([i, j, _fmt(n1[i, 0]), _fmt(n1[i, 1]), _fmt(n2[j, 0]), _fmt(n2[j, 1]),
                            _fmt(values[i, j])])


def grid_from_csv(path: str | Path, sector: Sector) -> ScalarField:
    values = np.full(sector.grid_shape, np.nan)
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                values[int(row["node1"]), int(row["node2"])] = float(row["value"])
            except (KeyError, ValueError, IndexError) as exc:
                raise SectorMismatch(f"{path}:{lineno}: bad grid row ({exc})") from None
    if np.isnan(values).any():
        raise SectorMismatch(f"{path}: grid file does not cover every node")
    return ScalarField.from_values(sector, values)
