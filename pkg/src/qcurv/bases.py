"""Orthonormal Laplace eigenbases on single surface factors.

Spheres use real spherical harmonics sampled on a Gauss-Legendre (colatitude)
by uniform (longitude) grid; tori use real Fourier products on a uniform grid.
Both grids integrate products of two basis functions exactly, so the discrete
Gram matrix ``B.T @ diag(w) @ B`` is the identity to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .geometry import HYPERBOLIC, SPHERE, TORUS, FactorSpec


@dataclass(frozen=True, eq=False)
class FactorBasis:
    """Spectral basis of one factor.

    Attributes
    ----------
    eigenvalues : (n,) array
        Laplace eigenvalues (nonnegative convention) of the basis functions.
    labels : tuple
        ``(l, m)`` for spheres, ``(jx, jy)`` for tori (positive index = cosine,
        negative = sine, 0 = constant), ``(i,)`` for abstract factors.
    degree : (n,) int array
        Bandlimit bookkeeping: ``l`` on spheres, ``max(|jx|, |jy|)`` on tori.
    nodes, weights : grid coordinates and quadrature weights (None when the
        factor has no grid).
    synthesis : (n_nodes, n) array mapping coefficients to node values.
    """

    kind: str
    area: float
    eigenvalues: np.ndarray
    labels: tuple
    degree: np.ndarray
    nodes: np.ndarray | None
    weights: np.ndarray | None
    synthesis: np.ndarray | None

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def grid_backed(self) -> bool:
        return self.synthesis is not None

    def index(self, label) -> int:
        return self.labels.index(tuple(label))


def _real_sph_harm(l: int, m: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    y = sph_harm_y(l, abs(m), theta, phi)
    if m == 0:
        return y.real
    sign = (-1) ** m
    if m > 0:
        return math.sqrt(2.0) * sign * y.real
    return math.sqrt(2.0) * sign * y.imag


def sphere_basis(radius: float, L: int) -> FactorBasis:
    # about 3/2 oversampling: L+1 nodes and 2L+1 longitudes would interpolate
    # the band exactly, leaving out-of-band content invisible at the nodes
    n_theta = (3 * L) // 2 + 1
    n_phi = 3 * L + 1
    x, w_gl = np.polynomial.legendre.leggauss(n_theta)
    order = np.argsort(-x)  # colatitude ascending
    theta_1d = np.arccos(x[order])
    w_gl = w_gl[order]
    phi_1d = 2.0 * math.pi * np.arange(n_phi) / n_phi
    theta, phi = np.meshgrid(theta_1d, phi_1d, indexing="ij")
    theta, phi = theta.ravel(), phi.ravel()
    weights = np.outer(w_gl, np.full(n_phi, 2.0 * math.pi / n_phi)).ravel() * radius**2

    labels, eig, deg, cols = [], [], [], []
    for l in range(L + 1):
        for m in range(-l, l + 1):
            labels.append((l, m))
            eig.append(l * (l + 1) / radius**2)
            deg.append(l)
            cols.append(_real_sph_harm(l, m, theta, phi) / radius)
    return FactorBasis(
        kind=SPHERE,
        area=4.0 * math.pi * radius**2,
        eigenvalues=np.array(eig),
        labels=tuple(labels),
        degree=np.array(deg),
        nodes=np.column_stack([theta, phi]),
        weights=weights,
        synthesis=np.column_stack(cols),
    )


def _fourier_1d(j: int, x: np.ndarray, period: float) -> np.ndarray:
    if j == 0:
        return np.full_like(x, 1.0 / math.sqrt(period))
    k = 2.0 * math.pi * abs(j) / period
    trig = np.cos if j > 0 else np.sin
    return math.sqrt(2.0 / period) * trig(k * x)


def torus_basis(periods: tuple[float, float], K: int) -> FactorBasis:
    L1, L2 = periods
    # 3K+1 points per axis: exact for products of two modes and leaves room
    # for out-of-band content to show up in the aliasing residual.
    n = 3 * K + 1
    x1 = L1 * np.arange(n) / n
    x2 = L2 * np.arange(n) / n
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    X1, X2 = X1.ravel(), X2.ravel()
    weights = np.full(n * n, L1 * L2 / (n * n))

    order = [0] + [s * k for k in range(1, K + 1) for s in (1, -1)]
    labels, eig, deg, cols = [], [], [], []
    for jx in order:
        for jy in order:
            labels.append((jx, jy))
            eig.append((2 * math.pi * jx / L1) ** 2 + (2 * math.pi * jy / L2) ** 2)
            deg.append(max(abs(jx), abs(jy)))
            cols.append(_fourier_1d(jx, X1, L1) * _fourier_1d(jy, X2, L2))
    return FactorBasis(
        kind=TORUS,
        area=L1 * L2,
        eigenvalues=np.array(eig),
        labels=tuple(labels),
        degree=np.array(deg),
        nodes=np.column_stack([X1, X2]),
        weights=weights,
        synthesis=np.column_stack(cols),
    )


def constant_basis(kind: str, area: float) -> FactorBasis:
    """Only the constant mode; one virtual node carrying the whole area."""
    return FactorBasis(
        kind=kind,
        area=area,
        eigenvalues=np.zeros(1),
        labels=((0, 0),) if kind != HYPERBOLIC else ((0,),),
        degree=np.zeros(1, dtype=int),
        nodes=np.full((1, 2), np.nan),
        weights=np.array([area]),
        synthesis=np.array([[1.0 / math.sqrt(area)]]),
    )


def abstract_basis(factor: FactorSpec, n: int) -> FactorBasis:
    spectrum = (0.0,) if factor.spectrum is None else factor.spectrum
    return FactorBasis(
        kind=HYPERBOLIC,
        area=factor.area,
        eigenvalues=np.array(spectrum[:n], dtype=float),
        labels=tuple((i,) for i in range(n)),
        degree=np.arange(n),
        nodes=None,
        weights=None,
        synthesis=None,
    )


@lru_cache(maxsize=64)
def factor_basis(factor: FactorSpec, resolution: int, constant_only: bool = False) -> FactorBasis:
    if constant_only:
        return constant_basis(factor.kind, factor.area)
    if factor.kind == SPHERE:
        return sphere_basis(factor.radius, resolution)
    if factor.kind == TORUS:
        return torus_basis(factor.periods, resolution)
    return abstract_basis(factor, resolution)
