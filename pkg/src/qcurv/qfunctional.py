"""The conformally invariant functional ``u -> int u Q^g dmu_g`` on N(P).

Everything here is computed in a :class:`QContext`, which fixes a metric
``g = e^{2 omega} g_background`` in the conformal class together with its
Q-curvature, measure and a certified basis of N(P). Tolerances on functional
values are relative to the Cauchy-Schwarz scale ``||Q^g|| ||u||`` (both
L2(g)), which every report records.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from .errors import ConstantInput, KQZero, NotConstantQ, NotInKernel
from .fields import (
    ConformalFactor,
    ScalarField,
    Sector,
    make_sector,
    metric_weights,
    odd_power,
)
from .geometry import ProductManifold
from .kernel import DEFAULT_TOL, KernelBasis, kernel_basis
from .paneitz import PaneitzOperator, QField, assemble_background, conformal_paneitz, q_background, q_transform

SIGN_MARGIN = 1e-10
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QContext:
    """A metric in the conformal class with its Q-curvature and N(P)."""

    sector: Sector
    p_background: PaneitzOperator
    q: QField
    kernel: KernelBasis
    omega: ConformalFactor | None = None
    tol: float = DEFAULT_TOL
    nq_override: "NQBasis | None" = None
    # lower bound for the Q-norm used in tolerance scales; keeps a context whose
    # Q-curvature is pure roundoff (after a Q-flat solve) from judging itself
    scale_floor: float = 0.0

    @property
    def manifold(self) -> ProductManifold:
        return self.sector.manifold

    @property
    def metric_tag(self) -> str:
        return self.q.metric_tag

    @property
    def p(self) -> PaneitzOperator:
        if self.omega is None:
            return self.p_background
        return conformal_paneitz(self.p_background, self.omega)

    @property
    def weights(self) -> np.ndarray | None:
        if not self.sector.grid_backed:
            return None
        return metric_weights(self.sector, self.omega)

    def integrate(self, f: ScalarField, h: ScalarField | None = None) -> float:
        """``int f h dmu_g`` (``h`` defaults to 1)."""
        if self.weights is None:
            # background only: L2 pairing of coefficients
            other = ScalarField.constant(self.sector, 1.0) if h is None else h
            return float(np.sum(f.coeffs * other.coeffs))
        fv = f.values() if h is None else f.values() * h.values()
        return float(np.sum(self.weights * fv))

    def integrate_values(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def l2(self, f: ScalarField) -> float:
        return math.sqrt(max(self.integrate(f, f), 0.0))

    @property
    def volume(self) -> float:
        if self.weights is None:
            return self.sector.volume
        return float(self.weights.sum())

    @property
    def q_l2(self) -> float:
        return self.l2(self.q.q)

    @property
    def k_q(self) -> float:
        return self.integrate(self.q.q)

    @property
    def q_scale(self) -> float:
        return max(self.q_l2, self.scale_floor)

    @property
    def k_q_scale(self) -> float:
        return self.q_scale * math.sqrt(self.volume)

    @property
    def k_q_vanishes(self) -> bool:
        return abs(self.k_q) <= self.tol * self.k_q_scale

    def functional_scale(self, u: ScalarField) -> float:
        return self.q_scale * self.l2(u)

    def rescaled(self, omega: ConformalFactor) -> "QContext":
        """Context of ``e^{2 omega} g``; N(P) is carried over unchanged."""
        q_hat = q_transform(self.q, omega, self.p)
        total = q_hat.omega
        return QContext(self.sector, self.p_background, q_hat, self.kernel, total, self.tol,
                        self.nq_override, self.scale_floor)

    def with_scale_floor(self, floor: float) -> "QContext":
        return replace(self, scale_floor=float(floor))

    def describe(self) -> dict:
        return {
            "metric_tag": self.metric_tag,
            "k_Q": self.k_q,
            "volume": self.volume,
            "Q_sup": self.q.sup_norm(),
            "Q_L2": self.q_l2,
            "dim_NP": self.kernel.dim,
            "kernel_status": self.kernel.status,
            "tol": self.tol,
        }


def build_context(
    m: ProductManifold,
    sector: Sector | str = "full",
    omega: ConformalFactor | None = None,
    tol: float = DEFAULT_TOL,
) -> QContext:
    """Background context of ``m``, optionally rescaled by ``omega``."""
    if not isinstance(sector, Sector):
        sector = make_sector(m, sector)
    p = assemble_background(m, sector)
    ctx = QContext(sector, p, q_background(m, sector), kernel_basis(p, tol), None, tol)
    return ctx if omega is None else ctx.rescaled(omega)


# -- the functional --------------------------------------------------------


def in_kernel(ctx: QContext, u: ScalarField) -> bool:
    pu = np.linalg.norm(ctx.p_background.symbol * u.coeffs)
    return pu <= ctx.tol * ctx.p_background.norm * max(u.coeff_norm(), np.finfo(float).tiny)


def q_functional(ctx: QContext, u: ScalarField) -> float:
    """``int u Q^g dmu_g`` for ``u`` in N(P); conformally invariant."""
    if not in_kernel(ctx, u):
        raise NotInKernel("u is not in N(P) within tolerance; the pairing would not be invariant")
    return ctx.integrate(u, ctx.q.q)


def q_functional_drift(ctx: QContext, u: ScalarField, omegas) -> dict:
    """Relative change of ``Q(u)`` across conformal rescalings of ``ctx``."""
    ref = q_functional(ctx, u)
    drifts, values = [], []
    for om in omegas:
        c = ctx.rescaled(om)
        v = q_functional(c, u)
        scale = max(abs(ref), c.functional_scale(u), ctx.functional_scale(u))
        values.append(v)
        drifts.append(abs(v - ref) / scale if scale > 0 else abs(v - ref))
    return {"reference": ref, "values": values, "max_relative_drift": max(drifts, default=0.0)}


def k_q_drift(ctx: QContext, omegas) -> dict:
    """Relative change of ``k_Q`` across conformal rescalings of ``ctx``.

    The scale is ``max(|k_Q|, ||Q^hat|| sqrt(Vol_hat))`` so that vanishing
    ``k_Q`` is judged against the size of the rescaled integrand.
    """
    ref = ctx.k_q
    values, drifts = [], []
    for om in omegas:
        c = ctx.rescaled(om)
        v = c.k_q
        scale = max(abs(ref), ctx.k_q_scale, c.k_q_scale)
        values.append(v)
        drifts.append(abs(v - ref) / scale if scale > 0 else abs(v - ref))
    return {"reference": ref, "values": values, "max_relative_drift": max(drifts, default=0.0)}


@dataclass(frozen=True)
class NQBasis:
    """Basis of N(Q) = {u in N(P) : Q(u) = 0}."""

    fields: tuple[ScalarField, ...]
    codim_in_NP: int
    functional_values: tuple[float, ...] = ()
    scales: tuple[float, ...] = ()

    @property
    def dim(self) -> int:
        return len(self.fields)


def nq_basis(ctx: QContext) -> NQBasis:
    if ctx.nq_override is not None:
        return ctx.nq_override
    b = ctx.kernel.fields
    values = np.array([ctx.integrate(u, ctx.q.q) for u in b])
    scales = np.array([ctx.functional_scale(u) for u in b])
    if np.all(np.abs(values) <= ctx.tol * scales):
        return NQBasis(tuple(b), 0, tuple(values), tuple(scales))
    # kernel basis is orthonormal in the background, so an orthonormal null
    # vector of the value row gives orthonormal N(Q) members
    combos = null_space(values[None, :] / np.linalg.norm(values))
    fields = tuple(_combine(b, c) for c in combos.T)
    return NQBasis(fields, 1, tuple(values), tuple(scales))


def _combine(fields, coeffs) -> ScalarField:
    out = ScalarField.zeros(fields[0].sector)
    for f, c in zip(fields, coeffs):
        out = out + float(c) * f
    return out


# -- decomposition N(P) = N(d) + N(Q) ---------------------------------------


@dataclass(frozen=True)
class Decomposition:
    u0: float
    u1: ScalarField
    q_of_u: float
    k_q: float


def decompose(ctx: QContext, u: ScalarField) -> Decomposition:
    """Split ``u in N(P)`` as ``u0 + u1`` with ``u0 = Q(u)/k_Q`` constant and ``u1 in N(Q)``."""
    if ctx.k_q_vanishes:
        raise KQZero(f"k_Q = {ctx.k_q:.3e} vanishes; constants lie in N(Q) and do not split off")
    qu = q_functional(ctx, u)
    u0 = qu / ctx.k_q
    return Decomposition(u0, u - u0, qu, ctx.k_q)


@dataclass(frozen=True)
class HodgeComparison:
    u0: float
    mean: float
    defect: float
    limit: float
    agrees: bool


def hodge_compare(ctx: QContext, u: ScalarField, rtol: float = 1e-8) -> HodgeComparison:
    """Compare the conformal split with mean + mean-zero when ``Q^g`` is constant."""
    qv = ctx.q.values()
    qbar = ctx.integrate(ctx.q.q) / ctx.volume
    spread = float(np.abs(qv - qbar).max())
    if spread > rtol * max(abs(qbar), np.finfo(float).tiny):
        raise NotConstantQ(f"Q^g varies by {spread:.3e} around its mean {qbar:.6g}")
    dec = decompose(ctx, u)
    mean = ctx.integrate(u) / ctx.volume
    defect = abs(dec.u0 - mean) * math.sqrt(ctx.volume)
    limit = rtol * max(ctx.l2(u), np.finfo(float).tiny)
    return HodgeComparison(dec.u0, mean, defect, limit, defect <= limit)


# -- forbidden functions -----------------------------------------------------


class Verdict(str, enum.Enum):
    IN_NULL_Q = "InNullQ"
    SIGN_VS_KQ = "SignVsKQ"
    F_CERTIFICATE = "FCertificate"
    NO_CERTIFICATE = "NoCertificate"


ALL_MULTIPLES = "Q^g != a f for every g in c and every real a != 0"
POSITIVE_MULTIPLES = "Q^g != a f for every g in c and every real a > 0"


@dataclass(frozen=True)
class ForbiddenCertificate:
    verdict: Verdict
    witness: ScalarField | None = None
    evidence: dict = field(default_factory=dict)
    excludes: str | None = None
    heuristic: bool = False

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "excludes": self.excludes,
            "heuristic": self.heuristic,
            "evidence": self.evidence,
            "witness_coeffs": None if self.witness is None else self.witness.flat.tolist(),
        }


def sign_class(values: np.ndarray, margin: float = SIGN_MARGIN) -> str:
    """'+' / '-' (single-signed, not identically zero), '0', or 'mixed'."""
    top = float(np.abs(values).max()) if values.size else 0.0
    tol = margin * top
    if top == 0.0 or np.all(np.abs(values) <= tol):
        return "0"
    if np.all(values >= -tol):
        return "+"
    if np.all(values <= tol):
        return "-"
    return "mixed"


def sphere_directions(d: int, step_deg: float = 5.0, max_points: int = 200_000) -> tuple[np.ndarray, float]:
    """Unit vectors on a hyperspherical-angle grid in R^d; returns (directions, step used)."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), 180.0
    step = step_deg
    while True:
        n_polar = int(round(180.0 / step)) + 1
        n_az = int(round(360.0 / step))
        if n_polar ** (d - 2) * n_az <= max_points:
            break
        step *= 1.25
    polar = np.radians(np.linspace(0.0, 180.0, n_polar))
    az = np.radians(np.arange(n_az) * (360.0 / n_az))
    grids = np.meshgrid(*([polar] * (d - 2) + [az]), indexing="ij")
    angles = [g.ravel() for g in grids]
    out = np.empty((angles[0].size, d))
    sin_acc = np.ones(angles[0].size)
    for k, a in enumerate(angles):
        out[:, k] = sin_acc * np.cos(a)
        sin_acc = sin_acc * np.sin(a)
    out[:, d - 1] = sin_acc
    return out, step


def f_criterion(ctx: QContext, f: ScalarField, u: ScalarField, margin: float = SIGN_MARGIN) -> dict:
    """``f u >= 0`` at every node and ``int f u dmu_g > 0``: then ``f`` is in F.

    Positivity of the integral then holds for every metric in the class, so
    ``f`` is never L2-orthogonal to ``u`` in N(Q).
    """
    prod = f.values() * u.values()
    top = float(np.abs(f.values()).max() * np.abs(u.values()).max())
    integral = ctx.integrate_values(prod)
    int_margin = MEMBERSHIP_TOL * ctx.l2(f) * ctx.l2(u)
    min_prod = float(prod.min())
    return {
        "passed": bool(min_prod >= -margin * top and integral > int_margin and top > 0),
        "min_product": min_prod,
        "pointwise_margin": margin * top,
        "integral": integral,
        "integral_margin": int_margin,
    }


def _values_matrix(fields) -> np.ndarray:
    return np.array([f.values().ravel() for f in fields])


def _search_f_witness(ctx, f, nq: NQBasis, step_deg, margin):
    U = _values_matrix(nq.fields)
    fv = f.values().ravel()
    w = ctx.weights.ravel()
    top_f = np.abs(fv).max()
    dirs, step = sphere_directions(nq.dim, step_deg)
    if nq.dim > 1:
        dirs = np.vstack([np.eye(nq.dim), -np.eye(nq.dim), dirs])
    best = None
    chunk = max(1, int(2e7 // max(U.shape[1], 1)))
    for start in range(0, len(dirs), chunk):
        C = dirs[start:start + chunk]
        UV = C @ U
        prod = UV * fv
        top = top_f * np.abs(UV).max(axis=1)
        ok = prod.min(axis=1) >= -margin * top
        if not ok.any():
            continue
        integrals = prod @ w
        integrals[~ok] = -np.inf
        k = int(np.argmax(integrals))
        if best is None or integrals[k] > best[0]:
            best = (integrals[k], C[k])
    return best, step


def forbidden_certificate(
    ctx: QContext,
    f: ScalarField,
    nq: NQBasis | None = None,
    step_deg: float = 5.0,
    margin: float = SIGN_MARGIN,
) -> ForbiddenCertificate:
    """Reason why ``f`` cannot be (a multiple of) ``Q^g`` for any ``g`` in the class.

    Checks, in order: membership in N(Q); single sign against the sign of
    ``k_Q``; a witness ``u in N(Q)`` with ``f u >= 0``. ``NoCertificate`` only
    means none of these sufficient conditions applied.
    """
    nq = nq_basis(ctx) if nq is None else nq
    fnorm = ctx.l2(f)
    evidence: dict = {"k_Q": ctx.k_q, "f_L2": fnorm, "dim_NQ": nq.dim}

    # (i) f in N(Q)
    if nq.dim and fnorm > 0:
        G = np.array([[ctx.integrate(a, b) for b in nq.fields] for a in nq.fields])
        rhs = np.array([ctx.integrate(a, f) for a in nq.fields])
        c = np.linalg.solve(G, rhs)
        proj_values = c @ _values_matrix(nq.fields)
        resid_values = f.values().ravel() - proj_values
        residual = math.sqrt(max(float(np.sum(ctx.weights.ravel() * resid_values**2)), 0.0)) / fnorm
        evidence["membership_residual"] = residual
        if residual <= MEMBERSHIP_TOL:
            evidence["coefficients"] = c.tolist()
            return ForbiddenCertificate(Verdict.IN_NULL_Q, _combine(nq.fields, c), evidence, ALL_MULTIPLES)

    # (ii) single sign against k_Q
    cls = sign_class(f.values(), margin)
    evidence["sign"] = cls
    evidence["f_min"] = float(f.values().min())
    evidence["f_max"] = float(f.values().max())
    if cls in ("+", "-"):
        if ctx.k_q_vanishes:
            evidence["k_Q_tolerance"] = ctx.tol * ctx.k_q_scale
            return ForbiddenCertificate(Verdict.SIGN_VS_KQ, None, evidence, ALL_MULTIPLES)
        if (cls == "+" and ctx.k_q < 0) or (cls == "-" and ctx.k_q > 0):
            return ForbiddenCertificate(Verdict.SIGN_VS_KQ, None, evidence, POSITIVE_MULTIPLES)

    # (iii) sign-compatible witness in N(Q)
    if nq.dim and fnorm > 0:
        best, step = _search_f_witness(ctx, f, nq, step_deg, margin)
        evidence["search_step_deg"] = step
        if best is not None:
            u = _combine(nq.fields, best[1])
            check = f_criterion(ctx, f, u, margin)
            evidence.update(check)
            if check["passed"]:
                return ForbiddenCertificate(
                    Verdict.F_CERTIFICATE, u, evidence, ALL_MULTIPLES, heuristic=nq.dim > 1
                )
    return ForbiddenCertificate(Verdict.NO_CERTIFICATE, None, evidence, None, heuristic=nq.dim > 1)


@dataclass(frozen=True)
class ForbiddenFamily:
    fields: tuple[ScalarField, ...]
    exponents: tuple[int, ...]
    certificates: tuple[dict, ...]
    gram: np.ndarray
    singular_values: np.ndarray
    rank: int

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)


def forbidden_family(ctx: QContext, u: ScalarField, exponents=(1, 3, 5), rank_rtol: float = 1e-6) -> ForbiddenFamily:
    """Odd powers ``u^p`` of ``u in N(Q)``; each is certified against witness ``u``.

    The Gram matrix is taken over the L2(g)-normalized powers, so its rank
    reflects linear independence rather than the size of ``u``.
    """
    if u.is_constant():
        raise ConstantInput("u must be non-constant; powers of a constant are linearly dependent")
    exponents = tuple(int(p) for p in exponents)
    fields = tuple(u.bandlimited() if p == 1 else odd_power(u, p) for p in exponents)
    certs = tuple(f_criterion(ctx, f, u) for f in fields)
    normed = [f / ctx.l2(f) for f in fields]
    gram = np.array([[ctx.integrate(a, b) for b in normed] for a in normed])
    sv = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(sv > rank_rtol * sv[0]))
    return ForbiddenFamily(fields, exponents, certs, gram, sv, rank)


# -- obstruction to constant Q ----------------------------------------------


@dataclass(frozen=True)
class ObstructionResult:
    status: str  # "CertifiedObstructed" or "NoCertificate"
    witness: ScalarField | None
    heuristic: bool
    evidence: dict

    @property
    def obstructed(self) -> bool:
        return self.status == "CertifiedObstructed"


def _best_nonnegative(ctx, nq: NQBasis, step_deg: float):
    """Maximize ``min_x u_c(x) / max_x |u_c(x)|`` over unit ``c``."""
    U = _values_matrix(nq.fields)
    d = nq.dim

    def score(C):
        V = C @ U
        return V.min(axis=1) / np.maximum(np.abs(V).max(axis=1), np.finfo(float).tiny)

    dirs, step = sphere_directions(d, step_deg)
    scores = np.concatenate([score(dirs[i:i + 20000]) for i in range(0, len(dirs), 20000)])
    c0 = dirs[int(np.argmax(scores))]
    res = minimize(lambda c: -score((c / np.linalg.norm(c))[None, :])[0], c0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    c = res.x / np.linalg.norm(res.x)
    if score(c[None, :])[0] < scores.max():
        c = c0
    return c, float(score(c[None, :])[0]), step


def constant_q_obstruction(ctx: QContext, nq: NQBasis | None = None, step_deg: float = 5.0,
                           margin: float = SIGN_MARGIN) -> ObstructionResult:
    """Look for a nonnegative nonzero element of N(Q), which rules out constant Q.

    With ``k_Q = 0`` a constant Q-curvature must vanish, so the question
    becomes the Fredholm condition ``N(P) in N(Q)``.
    """
    nq = nq_basis(ctx) if nq is None else nq
    evidence: dict = {"k_Q": ctx.k_q, "dim_NQ": nq.dim}
    if ctx.k_q_vanishes:
        values = [ctx.integrate(u, ctx.q.q) for u in ctx.kernel.fields]
        scales = [ctx.functional_scale(u) for u in ctx.kernel.fields]
        evidence.update({"route": "fredholm", "integrals": values})
        bad = [i for i, (v, s) in enumerate(zip(values, scales)) if abs(v) > ctx.tol * s]
        if bad:
            return ObstructionResult("CertifiedObstructed", ctx.kernel.fields[bad[0]], False, evidence)
        return ObstructionResult("NoCertificate", None, False, evidence)

    evidence["route"] = "nonnegative element of N(Q)"
    if nq.dim == 0:
        return ObstructionResult("NoCertificate", None, False, evidence)
    if nq.dim == 1:
        candidates = [nq.fields[0], -nq.fields[0]]
        for u in candidates:
            if sign_class(u.values(), margin) == "+":
                evidence["min_value"] = float(u.values().min())
                return ObstructionResult("CertifiedObstructed", u, False, evidence)
        evidence["min_ratio"] = max(float(u.values().min() / np.abs(u.values()).max()) for u in candidates)
        return ObstructionResult("NoCertificate", None, False, evidence)

    c, ratio, step = _best_nonnegative(ctx, nq, step_deg)
    evidence.update({"search_step_deg": step, "best_min_ratio": ratio})
    u = _combine(nq.fields, c)
    if ratio >= -margin and sign_class(u.values(), margin) == "+":
        evidence["min_value"] = float(u.values().min())
        return ObstructionResult("CertifiedObstructed", u, True, evidence)
    return ObstructionResult("NoCertificate", None, True, evidence)


# -- intersection over the conformal class ------------------------------------


@dataclass(frozen=True)
class CapReport:
    max_abs: float
    max_relative: float
    values: tuple[float, ...]
    scales: tuple[float, ...]


def verify_cap(ctx: QContext, f: ScalarField, omegas) -> CapReport:
    """``max_omega |int f Q^hat dmu_hat|`` over the sampled rescalings."""
    values, scales = [], []
    for om in omegas:
        c = ctx.rescaled(om)
        values.append(c.integrate(f, c.q.q))
        scales.append(c.functional_scale(f))
    absval = [abs(v) for v in values]
    rel = [a / s if s > 0 else a for a, s in zip(absval, scales)]
    return CapReport(max(absval, default=0.0), max(rel, default=0.0), tuple(values), tuple(scales))


def harmonic_report(ctx: QContext) -> dict:
    """Dimensions in ``0 -> N(d) -> N(P) -d-> H^1_conf -> H^1``."""
    m = ctx.manifold
    dim_np = ctx.kernel.dim
    out = {
        "dim_Nd": 1,
        "dim_NP": dim_np,
        "dim_dNP": dim_np - 1,
        "b1": m.betti1,
        "strong_0_regular": dim_np == 1,
        "kernel_status": ctx.kernel.status,
        "cohomology_map_checked": False,
        "note": "dimensions only; surjectivity of the map to de Rham H^1 is not decided",
    }
    if not ctx.k_q_vanishes:
        out["dim_NQ"] = nq_basis(ctx).dim
    return out
