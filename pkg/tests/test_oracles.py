"""The oracles reproduce the frozen reference values."""

import math

import numpy as np
import pytest

import oracles as o
from frozen import CURVATURE, Q_CONSTANT, SPHERE_COS4, SYMBOL

X = np.array([1.1, 0.3, 0.7, 1.9])

METRICS = {
    "s2s2": o.product_metric(o.sphere_block(1.0), o.sphere_block(1.0)),
    "s2t2": o.product_metric(o.sphere_block(1.0), o.flat_block()),
    "s2h2": o.product_metric(o.sphere_block(1.0), o.hyperbolic_block(1.0)),
    "t4": o.product_metric(o.flat_block(), o.flat_block()),
}


@pytest.fixture
def step(monkeypatch):
    def set_step(h):
        monkeypatch.setattr(o, "H", h)

    return set_step


@pytest.mark.parametrize("name", sorted(CURVATURE))
def test_curvature_scalars_from_christoffel(name, step):
    step(2e-3)
    R, ric = o.scalar_data(METRICS[name], X)
    assert R == pytest.approx(CURVATURE[name][0], abs=1e-8)
    assert ric == pytest.approx(CURVATURE[name][1], abs=1e-8)


@pytest.mark.parametrize("name", sorted(CURVATURE))
def test_q_constant_from_coordinates(name, step):
    step(5e-3)
    assert o.q_curvature(METRICS[name], X) == pytest.approx(Q_CONSTANT[name], abs=1e-5)


def test_round_s4_q_is_six(step):
    step(5e-3)
    stereo = lambda y: np.eye(4) * 4.0 / (1.0 + y @ y) ** 2
    assert o.q_curvature(stereo, np.array([0.3, -0.2, 0.5, 0.1])) == pytest.approx(6.0, rel=1e-5)


MODES = {
    "const": lambda y: 1.0,
    "cos x": lambda y: math.cos(y[2]),
}
LEGENDRE = {0: lambda t: 1.0, 1: lambda t: math.cos(t), 2: lambda t: 3 * math.cos(t) ** 2 - 1}


@pytest.mark.parametrize("key", sorted(SYMBOL))
def test_symbol_from_coordinate_paneitz(key, step):
    step(2e-2)
    name, l, second = key
    f = lambda y: LEGENDRE[l](y[0]) * MODES[second](y)
    value = o.paneitz(METRICS[name], f)(X) / f(X)
    assert value == pytest.approx(SYMBOL[key], abs=1e-4)


def test_cos4_quadrature():
    assert o.sphere_integral_cos_power(4) == pytest.approx(SPHERE_COS4, rel=1e-13)
