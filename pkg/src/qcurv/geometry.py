"""Product 4-manifolds built from constant-curvature surfaces.

A :class:`ProductManifold` is ``F1 x F2`` with the product metric, where each
factor is a round sphere, a flat torus, or an abstract closed hyperbolic
surface described only by its curvature scale, genus and (optionally) a list
of Laplace eigenvalues.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import AbstractFactorNotGridBacked, ConfigError

SPHERE = "Sphere2"
TORUS = "FlatTorus2"
HYPERBOLIC = "AbstractHyperbolic2"
FACTOR_KINDS = (SPHERE, TORUS, HYPERBOLIC)


@dataclass(frozen=True)
class FactorSpec:
    """One surface factor.

    Use the :func:`Sphere2`, :func:`FlatTorus2` and :func:`AbstractHyperbolic2`
    constructors rather than filling the fields by hand.
    """

    kind: str
    radius: float | None = None
    periods: tuple[float, float] | None = None
    scale: float | None = None
    genus: int | None = None
    spectrum: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ConfigError(f"unknown factor kind {self.kind!r}; expected one of {FACTOR_KINDS}")
        if self.kind == SPHERE:
            if self.radius is None or not self.radius > 0:
                raise ConfigError("Sphere2.radius must be a positive real")
        elif self.kind == TORUS:
            if self.periods is None or len(self.periods) != 2 or not min(self.periods) > 0:
                raise ConfigError("FlatTorus2.periods must be two positive reals")
        else:
            if self.scale is None or not self.scale > 0:
                raise ConfigError("AbstractHyperbolic2.scale must be a positive real")
            if self.genus is None or int(self.genus) != self.genus or self.genus < 2:
                raise ConfigError("AbstractHyperbolic2.genus must be an integer >= 2")
            if self.spectrum is not None:
                spec = np.asarray(self.spectrum, dtype=float)
                if spec.size == 0 or spec[0] != 0.0:
                    raise ConfigError("AbstractHyperbolic2.spectrum must start with 0")
                if np.any(spec < 0) or np.any(np.diff(spec) < 0):
                    raise ConfigError("AbstractHyperbolic2.spectrum must be nonnegative and ascending")

    @property
    def grid_backed(self) -> bool:
        return self.kind != HYPERBOLIC

    @property
    def area(self) -> float:
        if self.kind == SPHERE:
            return 4.0 * math.pi * self.radius**2
        if self.kind == TORUS:
            return self.periods[0] * self.periods[1]
        # Gauss-Bonnet with K = -1/b^2
        return 4.0 * math.pi * (self.genus - 1) * self.scale**2

    @property
    def gauss_curvature(self) -> float:
        if self.kind == SPHERE:
            return 1.0 / self.radius**2
        if self.kind == TORUS:
            return 0.0
        return -1.0 / self.scale**2

    @property
    def scalar_curvature(self) -> float:
        return 2.0 * self.gauss_curvature

    @property
    def euler_characteristic(self) -> int:
        if self.kind == SPHERE:
            return 2
        if self.kind == TORUS:
            return 0
        return 2 - 2 * self.genus

    @property
    def betti1(self) -> int:
        if self.kind == SPHERE:
            return 0
        if self.kind == TORUS:
            return 2
        return 2 * self.genus

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == SPHERE:
            out["radius"] = self.radius
        elif self.kind == TORUS:
            out["periods"] = list(self.periods)
        else:
            out["scale"] = self.scale
            out["genus"] = self.genus
            if self.spectrum is not None:
                out["spectrum"] = list(self.spectrum)
        return out


def Sphere2(radius: float = 1.0) -> FactorSpec:
    return FactorSpec(SPHERE, radius=float(radius))


def FlatTorus2(L1: float = 2 * math.pi, L2: float | None = None) -> FactorSpec:
    return FactorSpec(TORUS, periods=(float(L1), float(L1 if L2 is None else L2)))


def AbstractHyperbolic2(scale: float = 1.0, genus: int = 2, spectrum=None) -> FactorSpec:
    if spectrum is not None:
        spectrum = tuple(float(v) for v in spectrum)
    return FactorSpec(HYPERBOLIC, scale=float(scale), genus=int(genus), spectrum=spectrum)


def default_resolution(factor: FactorSpec) -> int:
    if factor.kind == SPHERE:
        return 16
    if factor.kind == TORUS:
        return 8
    return 1 if factor.spectrum is None else len(factor.spectrum)


@dataclass(frozen=True)
class ProductManifold:
    """``factor1 x factor2`` with spectral truncation ``resolution``.

    ``resolution[i]`` is the maximal harmonic degree for a sphere, the maximal
    Fourier index per axis for a torus, and the number of spectrum entries used
    for an abstract hyperbolic factor.
    """

    factor1: FactorSpec
    factor2: FactorSpec
    resolution: tuple[int, int] = field(default=(-1, -1))

    def __post_init__(self):
        res = list(self.resolution)
        for i, fac in enumerate((self.factor1, self.factor2)):
            if res[i] is None or res[i] < 0:
                res[i] = default_resolution(fac)
            res[i] = int(res[i])
            if fac.kind == HYPERBOLIC:
                available = 1 if fac.spectrum is None else len(fac.spectrum)
                if not 1 <= res[i] <= available:
                    raise ConfigError(
                        f"factor{i + 1}: hyperbolic resolution {res[i]} must lie in [1, {available}]"
                    )
        object.__setattr__(self, "resolution", tuple(res))

    @property
    def factors(self) -> tuple[FactorSpec, FactorSpec]:
        return (self.factor1, self.factor2)

    @property
    def dimension(self) -> int:
        return 4

    @property
    def volume(self) -> float:
        return self.factor1.area * self.factor2.area

    @property
    def euler_characteristic(self) -> int:
        return self.factor1.euler_characteristic * self.factor2.euler_characteristic

    @property
    def betti1(self) -> int:
        return self.factor1.betti1 + self.factor2.betti1

    def with_factor(self, index: int, factor: FactorSpec) -> "ProductManifold":
        if index == 1:
            return ProductManifold(factor, self.factor2, self.resolution)
        if index == 2:
            return ProductManifold(self.factor1, factor, self.resolution)
        raise ValueError("factor index must be 1 or 2")

    def to_dict(self) -> dict[str, Any]:
        return {
            "factor1": self.factor1.to_dict(),
            "factor2": self.factor2.to_dict(),
            "resolution": list(self.resolution),
        }


@dataclass(frozen=True)
class CurvatureData:
    R1: float
    R2: float
    R: float
    ricci_norm_sq: float
    volume: float


def curvature_scalars(m: ProductManifold) -> CurvatureData:
    R1 = m.factor1.scalar_curvature
    R2 = m.factor2.scalar_curvature
    # Ric = (R_i / 2) g_i on each 2-dimensional block
    return CurvatureData(
        R1=R1,
        R2=R2,
        R=R1 + R2,
        ricci_norm_sq=0.5 * R1**2 + 0.5 * R2**2,
        volume=m.volume,
    )


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product rule: ``weights[i, j] = weights1[i] * weights2[j]``.

    ``nodes1``/``nodes2`` hold chart coordinates of the factor nodes, one row
    per node. A factor that only enters through its constant mode is collapsed
    to a single node carrying its whole area; its coordinates are NaN.
    """

    nodes1: np.ndarray
    nodes2: np.ndarray
    weights1: np.ndarray
    weights2: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.weights1, self.weights2)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.weights1), len(self.weights2))

    @property
    def total(self) -> float:
        return float(self.weights1.sum() * self.weights2.sum())


def build_quadrature(m: ProductManifold, sector: str = "full") -> QuadratureRule:
    """Quadrature on ``m``; ``sector="factor1"`` collapses the second factor."""
    from .bases import factor_basis

    if sector not in ("full", "factor1"):
        raise ValueError(f"unknown sector {sector!r}")
    if not m.factor1.grid_backed:
        raise AbstractFactorNotGridBacked("factor1 has no grid; quadrature needs a grid-backed factor1")
    if sector == "full" and not m.factor2.grid_backed:
        raise AbstractFactorNotGridBacked(
            "full-product quadrature requested with an abstract hyperbolic factor; "
            "use the factor1 sector"
        )
    b1 = factor_basis(m.factor1, m.resolution[0])
    b2 = factor_basis(m.factor2, m.resolution[1], constant_only=(sector == "factor1"))
    return QuadratureRule(b1.nodes, b2.nodes, b1.weights, b2.weights)


# -- configuration ----------------------------------------------------------


def _toml_loads(text: str) -> dict:
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    return tomllib.loads(text)


def _parse_text(text: str, source: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    try:
        return _toml_loads(text)
    except Exception as exc:  # tomllib.TOMLDecodeError carries "(at line N, column M)"
        raise ConfigError(f"{source}: invalid TOML: {exc}") from exc


def _positive(d: Mapping, key: str, where: str) -> float:
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    try:
        value = float(d[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a number, got {d[key]!r}") from None
    if not value > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {d[key]!r}")
    return value


def factor_from_dict(d: Mapping, where: str = "factor") -> FactorSpec:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected a table")
    kind = d.get("kind")
    if kind == SPHERE:
        return Sphere2(_positive(d, "radius", where))
    if kind == TORUS:
        periods = d.get("periods")
        if not isinstance(periods, (list, tuple)) or len(periods) != 2:
            raise ConfigError(f"{where}.periods: expected two positive reals")
        return FlatTorus2(
            _positive({"p": periods[0]}, "p", f"{where}.periods[0]"),
            _positive({"p": periods[1]}, "p", f"{where}.periods[1]"),
        )
    if kind == HYPERBOLIC:
        genus = d.get("genus", 2)
        if not isinstance(genus, int) or genus < 2:
            raise ConfigError(f"{where}.genus: expected an integer >= 2, got {genus!r}")
        try:
            return AbstractHyperbolic2(_positive(d, "scale", where), genus, d.get("spectrum"))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: expected one of {FACTOR_KINDS}, got {kind!r}")


def manifold_from_dict(d: Mapping) -> ProductManifold:
    """Build a manifold from a parsed config; accepts a top-level ``manifold`` table."""
    if "manifold" in d:
        d = d["manifold"]
    for key in ("factor1", "factor2"):
        if key not in d:
            raise ConfigError(f"manifold.{key}: missing")
    f1 = factor_from_dict(d["factor1"], "manifold.factor1")
    f2 = factor_from_dict(d["factor2"], "manifold.factor2")
    res = d.get("resolution", [-1, -1])
    if not isinstance(res, (list, tuple)) or len(res) != 2 or not all(isinstance(r, int) for r in res):
        raise ConfigError(f"manifold.resolution: expected two integers, got {res!r}")
    return ProductManifold(f1, f2, tuple(res))


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    data = _parse_text(text, str(path))
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return data


def load_manifold(path: str | Path) -> ProductManifold:
    return manifold_from_dict(load_config(path))


# -- named configurations used throughout the tests and demos --------------


def sphere_sphere(L: int = 16) -> ProductManifold:
    return ProductManifold(Sphere2(1.0), Sphere2(1.0), (L, L))


def sphere_torus(L: int = 16, K: int = 8) -> ProductManifold:
    return ProductManifold(Sphere2(1.0), FlatTorus2(2 * math.pi, 2 * math.pi), (L, K))


def flat_torus4(K: int = 8) -> ProductManifold:
    return ProductManifold(FlatTorus2(2 * math.pi, 2 * math.pi), FlatTorus2(2 * math.pi, 2 * math.pi), (K, K))


def sphere_hyperbolic(a: float = 1.0, b: float = 1.0, genus: int = 2, L: int = 16, spectrum=None) -> ProductManifold:
    """``S^2(a) x Sigma_genus`` with hyperbolic scale ``b``; Q is constant and nonzero."""
    hyp = AbstractHyperbolic2(b, genus, spectrum)
    return ProductManifold(Sphere2(a), hyp, (L, -1))
