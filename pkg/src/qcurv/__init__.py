"""Paneitz operator null spaces and Q-curvature prescription on product 4-manifolds."""

__version__ = "0.1.0"

from .errors import (
    AbstractFactorNotGridBacked,
    AliasingExceeded,
    ConfigError,
    ConstantInput,
    FredholmViolation,
    IndeterminateGap,
    KQZero,
    NonConvergence,
    NotConstantQ,
    NotInKernel,
    QCurvError,
    SectorMismatch,
    SectorTooLarge,
    SignMismatch,
    StabilityViolation,
)
from .geometry import (
    AbstractHyperbolic2,
    CurvatureData,
    FactorSpec,
    FlatTorus2,
    ProductManifold,
    Sphere2,
    build_quadrature,
    curvature_scalars,
    sphere_hyperbolic,
    flat_torus4,
    load_manifold,
    sphere_sphere,
    sphere_torus,
)
from .fields import (
    ConformalFactor,
    ScalarField,
    Sector,
    analyze,
    inner_product,
    make_sector,
    random_conformal_factor,
    synthesize,
)
from .paneitz import (
    CONVENTIONS,
    CONVENTIONS_HASH,
    PaneitzOperator,
    QField,
    assemble_background,
    conformal_paneitz,
    q_background,
    q_transform,
)
from .kernel import KernelBasis, check_conformal_stability, kernel_basis, scan_parameter
from .qfunctional import (
    ForbiddenCertificate,
    QContext,
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
    verify_cap,
)
from .prescribe import PrescriptionResult, fredholm_integrals, iterate_constant_q, solve_q_flat
