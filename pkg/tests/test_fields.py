import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from frozen import SPHERE_COS4
from qcurv import (
    ConformalFactor,
    ScalarField,
    SectorMismatch,
    analyze,
    assemble_background,
    sphere_hyperbolic,
    inner_product,
    make_sector,
    random_conformal_factor,
    sphere_torus,
    synthesize,
)
from qcurv.errors import AbstractFactorNotGridBacked, AliasingExceeded
from qcurv.fields import (
    bandlimit_for,
    field_from_csv,
    field_to_csv,
    grid_from_csv,
    grid_to_csv,
    l2_norm,
    metric_weights,
    multiply,
    odd_power,
    pointwise_map,
    random_field,
)
from qcurv.qfunctional import sign_class

S2T2 = make_sector(sphere_torus(), "full")
ES1 = make_sector(sphere_hyperbolic(), "factor1")
seeds = st.integers(0, 2**32 - 1)


def rand(sector, seed):
    return random_field(sector, np.random.default_rng(seed))


def test_constant_coefficients():
    one = ScalarField.constant(S2T2, 1.0)
    expected = np.zeros(S2T2.shape)
    expected[0, 0] = math.sqrt(S2T2.volume)
    assert np.array_equal(one.coeffs, expected)
    assert np.allclose(one.values(), 1.0, atol=1e-14)


def test_basis_element_roundtrip():
    y = ScalarField.mode(S2T2, (1, 0))
    back = analyze(synthesize(y), S2T2)
    assert np.linalg.norm(back - y.coeffs) <= 1e-12


@given(seed=seeds)
def test_random_bandlimited_roundtrip(seed):
    f = rand(S2T2, seed)
    back = analyze(synthesize(f), S2T2)
    assert np.linalg.norm(back - f.coeffs) <= 1e-10 * max(f.coeff_norm(), 1.0)


@given(seed=seeds)
def test_parseval(seed):
    f = rand(S2T2, seed)
    assert np.sum(f.coeffs**2) == pytest.approx(inner_product(f, f), rel=1e-10)


def test_basic_pairings():
    one = ScalarField.constant(S2T2)
    assert inner_product(one, one) == pytest.approx(S2T2.volume, rel=1e-13)
    y0, y1 = ScalarField.mode(S2T2, (1, 0)), ScalarField.mode(S2T2, (1, 1))
    assert abs(inner_product(y0, y1)) <= 1e-12


def test_rescaled_volume_matches_closed_form():
    # omega = a cos(theta) on the sphere factor: int e^{4w} = A2 * 2 pi * sinh(4a) / (2a)
    c = 0.1
    a = c * math.sqrt(3 / (4 * math.pi)) / math.sqrt(S2T2.manifold.factor2.area)
    om = ConformalFactor(ScalarField.mode(S2T2, (1, 0), amplitude=c))
    one = ScalarField.constant(S2T2)
    value = inner_product(one, one, metric_weights(S2T2, om))
    exact = S2T2.manifold.factor2.area * 2 * math.pi * math.sinh(4 * a) / (2 * a)
    assert value == pytest.approx(exact, rel=1e-10)


@given(a=seeds, b=seeds)
def test_pairing_symmetric(a, b):
    f, h = rand(S2T2, a), rand(S2T2, b)
    scale = l2_norm(f) * l2_norm(h)
    assert abs(inner_product(f, h) - inner_product(h, f)) <= 1e-14 * scale


@given(seed=seeds, wseed=seeds)
def test_pairing_positive_definite(seed, wseed):
    f = rand(S2T2, seed)
    w = metric_weights(S2T2, random_conformal_factor(S2T2, wseed))
    assert inner_product(f, f, w) > 0


def test_pairing_sector_mismatch():
    with pytest.raises(SectorMismatch):
        inner_product(ScalarField.constant(S2T2), ScalarField.constant(ES1))


def test_cube_pairs_positively():
    u = ScalarField.mode(S2T2, (1, 0))
    u3 = odd_power(u, 3)
    area2 = S2T2.manifold.factor2.area
    expected = (3 / (4 * math.pi)) ** 2 * SPHERE_COS4 / area2
    assert inner_product(u, u3) == pytest.approx(expected, rel=1e-12)
    assert inner_product(u, u3) > 0


@given(seed=seeds)
def test_identity_map(seed):
    f = rand(S2T2, seed)
    g = pointwise_map(f, lambda v: v)
    assert np.abs(g.coeffs - f.coeffs).max() <= 1e-12 * max(f.coeff_norm(), 1.0)


def test_clamp_lands_in_positive_cone():
    u = ScalarField.mode(S2T2, (1, 0))
    with pytest.raises(AliasingExceeded):
        pointwise_map(u, lambda v: np.maximum(v, 0.0))
    clamped = pointwise_map(u, lambda v: np.maximum(v, 0.0), max_aliasing=None)
    assert sign_class(clamped.values()) == "+"
    assert clamped.aliasing > 0


def test_even_power_rejected():
    with pytest.raises(ValueError):
        odd_power(ScalarField.mode(S2T2, (1, 0)), 2)


def test_factor1_sector_closed_under_symbol_and_products():
    p = assemble_background(sphere_hyperbolic(), ES1)
    f = rand(ES1, 1)
    pf = p.apply(f)
    assert pf.sector == ES1 and pf.coeffs.shape == (ES1.shape[0], 1)
    prod = multiply(f, rand(ES1, 2))
    assert prod.sector == ES1
    assert prod.aliasing <= 1e-12  # degrees add to at most 2 L/3 < L


def test_factor1_sector_has_only_nu_zero():
    assert ES1.shape[1] == 1
    assert np.all(ES1.nu == 0.0)


def test_abstract_full_sector_has_no_grid():
    full = make_sector(sphere_hyperbolic(), "full")
    with pytest.raises(AbstractFactorNotGridBacked):
        synthesize(ScalarField.constant(full))


@given(seed=seeds)
def test_generated_conformal_factors_resolved(seed):
    om = random_conformal_factor(S2T2, seed)
    assert om.aliasing < 1e-8
    assert np.abs(om.values).max() == pytest.approx(0.05)


def test_unresolved_conformal_factor_rejected():
    rng = np.random.default_rng(0)
    wild = random_field(S2T2, rng, bandlimit=(16, 8), decay=1.0) * 0.5
    with pytest.raises(AliasingExceeded):
        ConformalFactor(wild)


def test_bandlimit_rule():
    assert bandlimit_for(S2T2) == (5, 2)
    assert bandlimit_for(ES1) == (5, 0)


def test_csv_roundtrips_bit_exact(tmp_path):
    f = rand(S2T2, 7)
    field_to_csv(f, tmp_path / "f.csv")
    g = field_from_csv(tmp_path / "f.csv", S2T2)
    assert np.array_equal(f.coeffs, g.coeffs)
    u3 = odd_power(ScalarField.mode(S2T2, (1, 0)), 3)
    grid_to_csv(u3, tmp_path / "g.csv")
    h = grid_from_csv(tmp_path / "g.csv", S2T2)
    assert np.array_equal(h.values(), u3.values())
