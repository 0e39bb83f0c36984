import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcurv import (
    ConformalFactor,
    FlatTorus2,
    IndeterminateGap,
    ProductManifold,
    ScalarField,
    Sphere2,
    assemble_background,
    check_conformal_stability,
    conformal_paneitz,
    sphere_hyperbolic,
    flat_torus4,
    kernel_basis,
    make_sector,
    random_conformal_factor,
    scan_parameter,
    sphere_sphere,
    sphere_torus,
)
from qcurv.kernel import positivity_note

from frozen import SYMBOL

seeds = st.integers(0, 2**32 - 1)


def _kernel(m, sector="full", tol=1e-9):
    return kernel_basis(assemble_background(m, sector), tol)


def test_flat_torus_kernel_is_constants():
    b = _kernel(flat_torus4())
    assert b.dim == 1
    assert b.status == "certified"


def test_es_kernel_is_first_harmonics():
    b = _kernel(sphere_hyperbolic(), "factor1")
    assert b.dim == 4
    assert b.gap == pytest.approx(24.0)
    sector = b.sector
    expected = {sector.mode_index((0, 0))} | {sector.mode_index((1, m)) for m in (-1, 0, 1)}
    support = {tuple(ix) for f in b.fields for ix in np.argwhere(np.abs(f.coeffs) > 1e-14)}
    assert support == expected
    assert b.status == "sector-certified"
    assert b.proof_note["holds"] is True


def test_sphere_torus_kernel_and_gap():
    b = _kernel(sphere_torus())
    assert b.dim == 1
    # the lowest torus mode sits below the first sphere harmonic
    assert b.gap == pytest.approx(SYMBOL[("s2t2", 0, "cos x")], rel=1e-14)
    assert SYMBOL[("s2t2", 0, "cos x")] < SYMBOL[("s2t2", 1, "const")]


@pytest.mark.parametrize("m,sector", [(sphere_sphere(), "full"), (sphere_torus(), "full"),
                                      (flat_torus4(), "full"), (sphere_hyperbolic(), "factor1")])
def test_kernel_basis_invariants(m, sector):
    p = assemble_background(m, sector)
    b = kernel_basis(p)
    C = b.coefficient_matrix()
    assert np.abs(C @ C.T - np.eye(b.dim)).max() <= 1e-12
    for u in b.fields:
        assert np.linalg.norm(p.symbol * u.coeffs) <= b.tol * p.norm
    assert b.fields[0].is_constant()
    assert b.gap >= 1e3 * b.threshold


def test_indeterminate_gap_near_crossing():
    near = sphere_hyperbolic(a=1.0 + 1e-3)
    with pytest.raises(IndeterminateGap) as err:
        _kernel(near, "factor1")
    assert err.value.gap < 1e3 * err.value.threshold


def test_dimension_stable_across_tolerances():
    for m, sector in [(sphere_torus(), "full"), (sphere_hyperbolic(), "factor1")]:
        dims = {_kernel(m, sector, tol).dim for tol in (1e-12, 1e-10, 1e-9, 1e-8)}
        assert len(dims) == 1


SMALL = [
    ProductManifold(Sphere2(1.0), FlatTorus2(2 * math.pi, 2 * math.pi), (4, 2)),
    ProductManifold(FlatTorus2(2 * math.pi, 2 * math.pi), FlatTorus2(2 * math.pi, 2 * math.pi), (2, 2)),
    sphere_hyperbolic(),
]


@pytest.mark.parametrize("m", SMALL)
def test_symbol_kernel_matches_dense_kernel(m):
    sector = "factor1" if m.factor2.kind == "AbstractHyperbolic2" else "full"
    p = assemble_background(m, sector)
    a = kernel_basis(p)
    zero = ConformalFactor(ScalarField.zeros(p.sector))
    b = kernel_basis(conformal_paneitz(p, zero))
    assert a.dim == b.dim
    A, B = a.coefficient_matrix(), b.coefficient_matrix()
    assert np.abs(A.T @ A - B.T @ B).max() <= 1e-9


def test_stability_zero_omega():
    m = SMALL[0]
    p = assemble_background(m)
    rep = check_conformal_stability(kernel_basis(p), p, ConformalFactor(ScalarField.zeros(p.sector)))
    assert rep.residual == 0.0 and rep.passed


@settings(max_examples=20)
@given(seed=seeds)
def test_stability_torus(seed):
    m = SMALL[1]
    p = assemble_background(m)
    rep = check_conformal_stability(kernel_basis(p), p, random_conformal_factor(p.sector, seed))
    assert rep.dim_rescaled == 1
    assert rep.residual <= rep.limit


@settings(max_examples=10)
@given(seed=seeds)
def test_stability_es_sphere_only(seed):
    p = assemble_background(sphere_hyperbolic(), "factor1")
    rep = check_conformal_stability(kernel_basis(p), p, random_conformal_factor(p.sector, seed))
    assert rep.dim_rescaled == 4
    assert rep.residual <= 10 * 1e-9


def test_scan_es_radius():
    res = scan_parameter(sphere_hyperbolic(), 1, "radius", 0.5, 1.5, 101)
    jumps = [s for s in res.steps if s.dim == 4]
    assert [s.param for s in jumps] == [pytest.approx(1.0)]
    assert all(s.dim == 1 for s in res.steps if s not in jumps)
    assert jumps[0].min_abs_lambda <= 1e-9 * jumps[0].norm
    assert len(res.brackets) == 2


def test_scan_sphere_torus_never_jumps():
    res = scan_parameter(sphere_torus(), 1, "radius", 0.5, 2.0, 31, sector="full")
    assert {s.dim for s in res.steps} == {1}
    assert res.brackets == []


def test_scan_single_step_and_workers():
    one = scan_parameter(sphere_hyperbolic(), 1, "radius", 0.7, 1.5, 1)
    assert [s.param for s in one.steps] == [0.7]
    a = scan_parameter(sphere_hyperbolic(), 1, "radius", 0.8, 1.2, 9)
    b = scan_parameter(sphere_hyperbolic(), 1, "radius", 0.8, 1.2, 9, workers=3)
    assert a.steps == b.steps


def test_scan_rejects_unknown_parameter():
    with pytest.raises(ValueError):
        scan_parameter(sphere_torus(), 1, "period1", 0.5, 1.0, 3)


def test_positivity_note_formula():
    note = positivity_note(sphere_hyperbolic())
    assert note["holds"] and note["c1"] == pytest.approx(-2.0) and note["c2"] == pytest.approx(2.0)
    # for a far from 1 the note still certifies nu > 0 modes
    assert positivity_note(sphere_hyperbolic(a=0.6))["holds"]


def test_es_full_sector_is_sector_certified():
    b = _kernel(sphere_hyperbolic(), "full")
    assert b.dim == 4
    assert b.status == "sector-certified"
