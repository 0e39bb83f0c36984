import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcurv import (
    ConstantInput,
    KQZero,
    NotConstantQ,
    NotInKernel,
    ScalarField,
    Verdict,
    build_context,
    constant_q_obstruction,
    decompose,
    forbidden_certificate,
    forbidden_family,
    harmonic_report,
    hodge_compare,
    k_q_drift,
    nq_basis,
    q_functional,
    q_functional_drift,
    random_conformal_factor,
    sphere_torus,
    verify_cap,
)
from qcurv.qfunctional import NQBasis, sign_class, sphere_directions

from frozen import K_Q

seeds = st.integers(0, 2**32 - 1)


def Y(ctx, l=1, m=0):
    return ScalarField.mode(ctx.sector, (l, m))


def omegas(ctx, n, start=0):
    return [random_conformal_factor(ctx.sector, s) for s in range(start, start + n)]


def test_background_k_q(ctx_s2s2, ctx_s2t2, ctx_t4, ctx_s2h2):
    assert ctx_s2s2.k_q == pytest.approx(K_Q["s2s2"], rel=1e-12)
    assert ctx_s2t2.k_q == pytest.approx(K_Q["s2t2"], rel=1e-12)
    assert ctx_s2h2.k_q == pytest.approx(K_Q["s2h2"], rel=1e-12)
    assert ctx_t4.k_q_vanishes


def test_functional_on_examples(ctx_s2h2):
    one = ScalarField.constant(ctx_s2h2.sector)
    assert q_functional(ctx_s2h2, one) == pytest.approx(K_Q["s2h2"], rel=1e-12)
    for m in (-1, 0, 1):
        assert abs(q_functional(ctx_s2h2, Y(ctx_s2h2, 1, m))) <= 1e-12 * abs(K_Q["s2h2"])


def test_functional_rejects_non_kernel(ctx_s2h2):
    with pytest.raises(NotInKernel):
        q_functional(ctx_s2h2, Y(ctx_s2h2, 2, 0))


@settings(max_examples=5)
@given(seed=seeds)
def test_constant_functional_invariant(ctx_s2t2, seed):
    one = ScalarField.constant(ctx_s2t2.sector)
    rep = q_functional_drift(ctx_s2t2, one, [random_conformal_factor(ctx_s2t2.sector, seed)])
    assert rep["max_relative_drift"] <= 1e-8


def test_k_q_drift_on_torus(ctx_t4):
    rep = k_q_drift(ctx_t4, omegas(ctx_t4, 3))
    assert rep["max_relative_drift"] <= 1e-8
    assert all(abs(v) <= 1e-8 * ctx_t4.rescaled(om).k_q_scale for v, om in zip(rep["values"], omegas(ctx_t4, 3)))


def test_nq_basis_dimensions(ctx_s2h2, ctx_t4, ctx_s2s2):
    sh = nq_basis(ctx_s2h2)
    assert (sh.dim, sh.codim_in_NP) == (3, 1)
    for u in sh.fields:
        assert u.coeffs[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert abs(q_functional(ctx_s2h2, u)) <= 1e-10 * ctx_s2h2.functional_scale(u)
    t4 = nq_basis(ctx_t4)
    assert (t4.dim, t4.codim_in_NP) == (1, 0)
    assert nq_basis(ctx_s2s2).dim == 0


def test_decompose_example(ctx_s2h2):
    u = 5.0 + 3.0 * Y(ctx_s2h2)
    dec = decompose(ctx_s2h2, u)
    assert dec.u0 == pytest.approx(5.0, rel=1e-12)
    assert np.allclose(dec.u1.coeffs, (3.0 * Y(ctx_s2h2)).coeffs, atol=1e-12)


def test_decompose_needs_nonzero_k_q(ctx_t4):
    with pytest.raises(KQZero):
        decompose(ctx_t4, ScalarField.constant(ctx_t4.sector))


@given(c=st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_decomposition_is_idempotent(ctx_s2h2, c):
    u = ScalarField.zeros(ctx_s2h2.sector)
    for a, f in zip(c, ctx_s2h2.kernel.fields):
        u = u + a * f
    dec = decompose(ctx_s2h2, u)
    again = decompose(ctx_s2h2, dec.u1)
    scale = max(u.coeff_norm(), 1.0)
    assert abs(again.u0) <= 1e-12 * scale
    assert np.abs(again.u1.coeffs - dec.u1.coeffs).max() <= 1e-12 * scale
    assert np.abs((dec.u0 + dec.u1).coeffs - u.coeffs).max() <= 1e-12 * scale


def test_hodge_agrees_for_constant_q(ctx_s2h2):
    u = 2.0 - Y(ctx_s2h2, 1, 1)
    cmp = hodge_compare(ctx_s2h2, u)
    assert cmp.agrees and cmp.mean == pytest.approx(2.0, rel=1e-12)


def test_hodge_needs_constant_q(ctx_s2t2):
    c = ctx_s2t2.rescaled(random_conformal_factor(ctx_s2t2.sector, 3))
    with pytest.raises(NotConstantQ):
        hodge_compare(c, ScalarField.constant(c.sector))


def test_certificate_in_null_q(ctx_s2h2):
    cert = forbidden_certificate(ctx_s2h2, Y(ctx_s2h2))
    assert cert.verdict is Verdict.IN_NULL_Q
    assert cert.evidence["membership_residual"] <= 1e-8


def test_certificate_sign_against_k_q(ctx_s2h2):
    bump = ScalarField.from_values(ctx_s2h2.sector, np.exp(4 * Y(ctx_s2h2).values()))
    cert = forbidden_certificate(ctx_s2h2, bump)
    assert cert.verdict is Verdict.SIGN_VS_KQ
    assert cert.evidence["sign"] == "+"
    # the same positive function is compatible with negative multiples only
    assert "a > 0" in cert.excludes


def test_certificate_odd_power(ctx_s2h2):
    y = Y(ctx_s2h2)
    cube = ScalarField.from_values(ctx_s2h2.sector, y.values() ** 3)
    cert = forbidden_certificate(ctx_s2h2, cube)
    assert cert.verdict is Verdict.F_CERTIFICATE
    assert cert.heuristic  # the witness search ran over a 3-dimensional N(Q)
    assert cert.evidence["integral"] > 0


def test_certificate_no_reason(ctx_s2h2):
    cert = forbidden_certificate(ctx_s2h2, Y(ctx_s2h2, 2, 0))
    assert cert.verdict is Verdict.NO_CERTIFICATE
    assert cert.heuristic


@pytest.mark.parametrize("value", [1.0, -3.0])
def test_constants_never_in_null_q(ctx_s2h2, ctx_s2s2, value):
    for ctx in (ctx_s2h2, ctx_s2s2):
        cert = forbidden_certificate(ctx, ScalarField.constant(ctx.sector, value))
        assert cert.verdict is not Verdict.IN_NULL_Q


def test_forbidden_family_rank(ctx_s2h2):
    fam = forbidden_family(ctx_s2h2, Y(ctx_s2h2))
    assert fam.rank == 3
    assert fam.singular_values[-1] > 1e-6 * fam.singular_values[0]
    assert all(c["passed"] for c in fam.certificates)


def test_forbidden_family_single_exponent(ctx_s2h2):
    fam = forbidden_family(ctx_s2h2, Y(ctx_s2h2, 1, -1), exponents=(1,))
    assert len(fam) == 1 and fam.rank == 1


def test_forbidden_family_rejects_constant(ctx_s2h2):
    with pytest.raises(ConstantInput):
        forbidden_family(ctx_s2h2, ScalarField.constant(ctx_s2h2.sector))


def test_obstruction_outcomes(ctx_s2h2, ctx_s2s2, ctx_t4):
    sh = constant_q_obstruction(ctx_s2h2)
    assert sh.status == "NoCertificate" and sh.heuristic
    assert sh.evidence["best_min_ratio"] < 0
    assert constant_q_obstruction(ctx_s2s2).status == "NoCertificate"
    assert constant_q_obstruction(ctx_t4).evidence["route"] == "fredholm"


def test_obstruction_with_injected_positive_element(ctx_s2h2):
    u = ScalarField.constant(ctx_s2h2.sector) + 0.5 * Y(ctx_s2h2)
    injected = ctx_s2h2.__class__(**{**ctx_s2h2.__dict__, "nq_override": NQBasis((u,), 1)})
    res = constant_q_obstruction(injected)
    assert res.obstructed and not res.heuristic
    assert res.evidence["min_value"] > 0


def test_cap_on_members_and_constants(ctx_s2h2, ctx_s2s2):
    for u in nq_basis(ctx_s2h2).fields:
        rep = verify_cap(ctx_s2h2, u, omegas(ctx_s2h2, 3))
        assert rep.max_relative <= 1e-8
    one = ScalarField.constant(ctx_s2s2.sector)
    rep = verify_cap(ctx_s2s2, one, omegas(ctx_s2s2, 2))
    assert rep.max_abs == pytest.approx(abs(K_Q["s2s2"]), rel=1e-8)


def test_harmonic_report(ctx_s2h2, ctx_t4, ctx_s2s2):
    dims = lambda c: tuple(harmonic_report(c)[k] for k in ("dim_NP", "dim_dNP", "b1"))
    assert dims(ctx_s2h2) == (4, 3, 4)
    assert dims(ctx_t4) == (1, 0, 4)
    assert dims(ctx_s2s2) == (1, 0, 0)
    assert harmonic_report(ctx_s2s2)["strong_0_regular"]
    assert not harmonic_report(ctx_s2h2)["cohomology_map_checked"]


def test_sign_class_and_directions():
    assert sign_class(np.array([0.0, 1.0])) == "+"
    assert sign_class(np.array([-1.0, 0.0])) == "-"
    assert sign_class(np.zeros(3)) == "0"
    assert sign_class(np.array([-1.0, 1.0])) == "mixed"
    dirs, _ = sphere_directions(3, 10.0)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_context_rescaling_keeps_kernel(ctx_s2t2):
    c = ctx_s2t2.rescaled(random_conformal_factor(ctx_s2t2.sector, 11))
    assert c.kernel.dim == 1
    assert c.volume != pytest.approx(ctx_s2t2.volume, rel=1e-6)
    assert build_context(sphere_torus(), "full").k_q == pytest.approx(c.k_q, rel=1e-8)
