"""Prescribing Q-curvature within a conformal class.

``solve_q_flat`` handles ``Q = 0`` exactly through the Fredholm alternative
for the self-adjoint operator ``P``. ``iterate_constant_q`` is an experimental
damped fixed-point scheme for a nonzero constant target; it has no convergence
guarantee and reports failure as :class:`~qcurv.errors.NonConvergence`.

All linear solves happen in background terms: with ``g = e^{2 w0} g_b`` one
has ``P^g = e^{-4 w0} P_b``, so ``P^g w = h`` is ``P_b w = e^{4 w0} h``, which
the diagonal background symbol inverts mode by mode off the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FredholmViolation, NonConvergence, SignMismatch
from .fields import ConformalFactor, ScalarField, analyze
from .paneitz import QField, q_transform
from .qfunctional import QContext

FREDHOLM_TOL = 1e-8
QFLAT_RTOL = 1e-6
CONSTQ_RTOL = 1e-5


@dataclass(frozen=True, eq=False)
class PrescriptionResult:
    """Outcome of a prescription solve relative to the metric of the input context.

    ``omega`` is the factor taking the input metric ``g`` to the new metric
    ``e^{2 omega} g``; ``residual`` is ``sup |Q_new - target|`` at the nodes.
    """

    omega: ConformalFactor
    q_new: QField
    target: float
    residual: float
    tolerance: float
    fredholm_violation: tuple[float, ...]
    fredholm_labels: tuple[str, ...]
    iterations: int = 0
    trace: list[dict] = field(default_factory=list)
    kernel_orthogonality: float = 0.0

    @property
    def converged(self) -> bool:
        return self.residual <= self.tolerance

    def context(self, ctx: QContext) -> QContext:
        """Context of the new metric; tolerance scales stay tied to ``ctx``."""
        floor = max(ctx.q_scale, ctx.scale_floor)
        return QContext(ctx.sector, ctx.p_background, self.q_new, ctx.kernel,
                        self.q_new.omega, ctx.tol, None, floor)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "converged": self.converged,
            "iterations": self.iterations,
            "fredholm_integrals": dict(zip(self.fredholm_labels, self.fredholm_violation)),
            "kernel_orthogonality": self.kernel_orthogonality,
            "omega_tag": self.omega.tag,
            "omega_aliasing": self.omega.aliasing,
        }


def _kernel_labels(ctx: QContext) -> tuple[str, ...]:
    return ("1",) + tuple(f"u{i}" for i in range(1, ctx.kernel.dim))


def _kernel_members(ctx: QContext) -> list[ScalarField]:
    """Kernel basis with the constant member rescaled to the function 1."""
    fields = list(ctx.kernel.fields)
    fields[0] = ScalarField.constant(ctx.sector, 1.0)
    return fields


def fredholm_integrals(ctx: QContext, h_values: np.ndarray | None = None) -> tuple[list[float], list[float]]:
    """``int h u dmu_g`` for ``u`` over N(P) (``h`` defaults to ``Q^g``), with their scales.

    The constant member is the function 1, so the first entry is ``k_Q``
    when ``h = Q^g``.
    """
    if h_values is None:
        h_values = ctx.q.values()
    w = ctx.weights
    h_l2 = math.sqrt(float(np.sum(w * h_values**2)))
    integrals, scales = [], []
    for u in _kernel_members(ctx):
        uv = u.values()
        integrals.append(float(np.sum(w * h_values * uv)))
        scales.append(max(h_l2, ctx.scale_floor) * math.sqrt(float(np.sum(w * uv * uv))))
    return integrals, scales


def _kernel_mask(ctx: QContext) -> np.ndarray:
    return np.abs(ctx.p_background.symbol) <= ctx.kernel.threshold


def _pseudo_inverse(ctx: QContext, rhs_background: np.ndarray) -> np.ndarray:
    """Coefficients of ``w`` with ``P_b w = rhs`` off the kernel and no kernel part."""
    coeffs = analyze(rhs_background, ctx.sector)
    zero = _kernel_mask(ctx)
    out = np.zeros_like(coeffs)
    out[~zero] = coeffs[~zero] / ctx.p_background.symbol[~zero]
    return out


def _g_orthogonalize(ctx: QContext, coeffs: np.ndarray) -> tuple[np.ndarray, float]:
    """Remove the g-orthogonal projection onto N(P); returns coefficients and the residual overlap."""
    w = ctx.weights
    members = ctx.kernel.fields
    U = np.array([u.values().ravel() for u in members])
    C = np.array([u.flat for u in members])
    G = (U * w.ravel()) @ U.T
    values = ScalarField(ctx.sector, coeffs).values().ravel()
    c = np.linalg.solve(G, (U * w.ravel()) @ values)
    new = coeffs - (c @ C).reshape(coeffs.shape)
    vals = ScalarField(ctx.sector, new).values().ravel()
    norm = math.sqrt(max(float(np.sum(w.ravel() * vals**2)), np.finfo(float).tiny))
    overlap = float(np.abs((U * w.ravel()) @ vals).max() / norm) if vals.any() else 0.0
    return new, overlap


def _background_factor(ctx: QContext) -> np.ndarray:
    """``e^{4 w0}`` at the nodes, where ``g = e^{2 w0} g_b``."""
    return np.ones(ctx.sector.grid_shape) if ctx.omega is None else ctx.omega.exp4


def solve_q_flat(ctx: QContext, fredholm_tol: float = FREDHOLM_TOL, rtol: float = QFLAT_RTOL) -> PrescriptionResult:
    """Find ``omega`` with ``Q`` of ``e^{2 omega} g`` identically zero.

    Solvable exactly when ``int Q^g u dmu_g = 0`` for every ``u`` in N(P);
    otherwise :class:`FredholmViolation` carries those integrals. The solution
    is the one g-orthogonal to N(P).
    """
    ctx.sector.require_grid()
    integrals, scales = fredholm_integrals(ctx)
    labels = _kernel_labels(ctx)
    bad = [abs(v) > fredholm_tol * s for v, s in zip(integrals, scales)]
    if any(bad):
        raise FredholmViolation(integrals, labels, scales)

    rhs = -_background_factor(ctx) * ctx.q.values()
    coeffs = _pseudo_inverse(ctx, rhs)
    coeffs, overlap = _g_orthogonalize(ctx, coeffs)
    omega = ConformalFactor(ScalarField(ctx.sector, coeffs))
    q_new = q_transform(ctx.q, omega, ctx.p)
    residual = float(np.abs(q_new.values()).max())
    scale = max(float(np.abs(rhs).max()), float(np.abs(ctx.q.values()).max()))
    tolerance = rtol * scale
    result = PrescriptionResult(omega, q_new, 0.0, residual, tolerance, tuple(integrals), labels,
                                kernel_orthogonality=overlap)
    if residual > tolerance:
        raise NonConvergence(
            f"Q-flat solve left sup|Q| = {residual:.3e} above {tolerance:.3e}; raise the truncation",
            [result.to_dict()],
        )
    return result


def _adjust_kernel(ctx, target, omega_values, kernel_values, q_integrals, weights, max_newton=60):
    """Newton solve for kernel coefficients ``a`` so that ``target e^{4 w}`` has the moments of ``Q^g``.

    With ``w = w_perp + sum a_i u_i`` the conditions are
    ``target int e^{4w} u_i dmu_g = int Q^g u_i dmu_g`` for all ``i``, which is
    exactly the solvability of the next linear step.
    """
    U = kernel_values
    a = np.zeros(U.shape[0])
    scale = np.abs(q_integrals).max() + abs(target) * float(weights.sum())
    history = []
    for _ in range(max_newton):
        e4 = np.exp(4.0 * (omega_values + a @ U))
        F = target * (U * (weights * e4)) @ np.ones(U.shape[1]) - q_integrals
        err = float(np.abs(F).max())
        history.append(err)
        if err <= 1e-13 * scale:
            return a, err, history
        J = 4.0 * target * (U * (weights * e4)) @ U.T
        step = np.linalg.solve(J, -F)
        t = 1.0
        while t > 1e-6:
            trial = a + t * step
            e4t = np.exp(4.0 * (omega_values + trial @ U))
            Ft = target * (U * (weights * e4t)) @ np.ones(U.shape[1]) - q_integrals
            if np.abs(Ft).max() < err:
                break
            t *= 0.5
        a = a + t * step
    e4 = np.exp(4.0 * (omega_values + a @ U))
    F = target * (U * (weights * e4)) @ np.ones(U.shape[1]) - q_integrals
    return a, float(np.abs(F).max()), history


def iterate_constant_q(
    ctx: QContext,
    target: float,
    damping: float = 0.5,
    max_iter: int = 200,
    rtol: float = CONSTQ_RTOL,
    fredholm_tol: float = FREDHOLM_TOL,
) -> PrescriptionResult:
    """Damped fixed point for ``Q`` of ``e^{2 omega} g`` equal to ``target``.

    Each step solves ``P^g w_new = target e^{4 w} - Q^g`` off the kernel,
    after moving the kernel part of ``w`` (including the additive constant,
    which fixes the volume at ``k_Q / target``) so that the right side is
    orthogonal to N(P).
    """
    ctx.sector.require_grid()
    if target == 0.0:
        return solve_q_flat(ctx, fredholm_tol)
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if ctx.k_q_vanishes or math.copysign(1.0, ctx.k_q) != math.copysign(1.0, target):
        raise SignMismatch(
            f"target {target:g} needs k_Q of the same sign, got k_Q = {ctx.k_q:.6g}; "
            "k_Q = target * volume is conformally invariant"
        )

    w = ctx.weights.ravel()
    qv = ctx.q.values()
    e4w0 = _background_factor(ctx)
    U = np.array([u.values().ravel() for u in ctx.kernel.fields])
    Ucoef = np.array([u.flat for u in ctx.kernel.fields])
    q_int = (U * w) @ qv.ravel()
    tolerance = rtol * abs(target)
    labels = _kernel_labels(ctx)
    trace: list[dict] = []

    def finish(coeffs, it):
        omega = ConformalFactor(ScalarField(ctx.sector, coeffs))
        q_new = q_transform(ctx.q, omega, ctx.p)
        residual = float(np.abs(q_new.values() - target).max())
        return omega, q_new, residual

    coeffs = np.zeros(ctx.sector.shape)
    residual = float(np.abs(qv - target).max())
    trace.append({"iteration": 0, "residual": residual, "kernel_moment_error": 0.0, "step": 0.0})
    if residual <= tolerance:
        omega, q_new, residual = finish(coeffs, 0)
        ints, _ = fredholm_integrals(ctx, qv - target)
        return PrescriptionResult(omega, q_new, target, residual, tolerance, tuple(ints), labels, 0, trace)

    for it in range(1, max_iter + 1):
        values = ScalarField(ctx.sector, coeffs).values().ravel()
        a, moment_err, _ = _adjust_kernel(ctx, target, values, U, q_int, w)
        moment_scale = np.abs(q_int).max() + abs(target) * float(w.sum())
        if not np.all(np.isfinite(a)) or moment_err > fredholm_tol * moment_scale:
            e4 = np.exp(4.0 * (values + a @ U))
            h = (target * e4 - qv.ravel()).reshape(qv.shape)
            ints, scales = fredholm_integrals(ctx, h)
            raise FredholmViolation(
                ints, labels, scales,
                f"iteration {it}: no kernel adjustment makes target*e^(4w) - Q orthogonal to N(P)",
            )
        coeffs = coeffs + (a @ Ucoef).reshape(coeffs.shape)
        values = values + a @ U
        rhs = e4w0 * (target * np.exp(4.0 * values.reshape(qv.shape)) - qv)
        perp = _pseudo_inverse(ctx, rhs)
        kernel_part = (((coeffs.ravel() @ Ucoef.T)) @ Ucoef).reshape(coeffs.shape)
        new = perp + kernel_part
        step = float(np.linalg.norm(new - coeffs))
        coeffs = (1.0 - damping) * coeffs + damping * new
        omega, q_new, residual = finish(coeffs, it)
        trace.append({"iteration": it, "residual": residual, "kernel_moment_error": moment_err, "step": step})
        if not math.isfinite(residual):
            break
        if residual <= tolerance:
            ints, _ = fredholm_integrals(ctx, (qv - target * np.exp(4.0 * omega.values)))
            return PrescriptionResult(omega, q_new, target, residual, tolerance, tuple(ints), labels, it, trace)
    raise NonConvergence(
        f"no convergence to Q = {target:g} within {max_iter} iterations "
        f"(last residual {trace[-1]['residual']:.3e}, tolerance {tolerance:.3e})",
        trace,
    )
