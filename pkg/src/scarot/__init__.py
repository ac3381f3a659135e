"""Scaling-rotation geometry and statistics for SPD matrices."""

__version__ = "0.1.0"

from .config import RunConfig
from .distance import MinimalPair, d_psr, d_sr, delta
from .errors import (
    AntipodalRotationWarning,
    BadParameter,
    DatasetError,
    DimensionMismatch,
    DimensionTooLarge,
    EmptyInput,
    NoConvergenceWarning,
    NonOrthogonalInput,
    NonPositiveEntry,
    NotPositiveDefinite,
    OutsideInjectivityRadius,
    ScarotError,
    UnsupportedDimension,
    UnsupportedStratum,
)
from .group import (
    Fiber,
    SignedPerm,
    Stratum,
    act,
    beta_g,
    canonical_decomposition,
    classify_stratum,
    enumerate_group,
    fiber_of,
    r_cx,
)
from .inference import (
    CoordinateCloud,
    Ellipsoid,
    GroupTestReport,
    ai_mean,
    bootstrap_cov,
    bootstrap_psr_means,
    confidence_region,
    le_coordinates,
    le_mean,
    psr_coordinates,
    sample_model_2d,
    sample_spd_lognormal,
    two_group_report,
    vecd,
)
from .manifold import (
    EigenDecomp,
    TangentVec,
    d_diag,
    d_m,
    d_so,
    devectorize,
    exp_map,
    geodesic,
    log_map,
    rot_log,
    vectorize,
)
from .mean import (
    Certificate,
    MeanResult,
    certify_sr_vs_psr,
    certify_stratum_avoidance,
    certify_uniqueness,
    f_psr,
    f_sr,
    frechet_mean_diag,
    frechet_mean_so,
    mean_orbit,
    minimize_fsr_lower,
    psr_mean,
)

__all__ = [
    "AntipodalRotationWarning",
    "BadParameter",
    "Certificate",
    "CoordinateCloud",
    "DatasetError",
    "DimensionMismatch",
    "DimensionTooLarge",
    "EigenDecomp",
    "Ellipsoid",
    "EmptyInput",
    "Fiber",
    "GroupTestReport",
    "MeanResult",
    "MinimalPair",
    "NoConvergenceWarning",
    "NonOrthogonalInput",
    "NonPositiveEntry",
    "NotPositiveDefinite",
    "OutsideInjectivityRadius",
    "RunConfig",
    "ScarotError",
    "SignedPerm",
    "Stratum",
    "TangentVec",
    "UnsupportedDimension",
    "UnsupportedStratum",
    "__version__",
    "act",
    "ai_mean",
    "beta_g",
    "bootstrap_cov",
    "bootstrap_psr_means",
    "canonical_decomposition",
    "certify_sr_vs_psr",
    "certify_stratum_avoidance",
    "certify_uniqueness",
    "classify_stratum",
    "confidence_region",
    "d_diag",
    "d_m",
    "d_psr",
    "d_so",
    "d_sr",
    "delta",
    "devectorize",
    "enumerate_group",
    "exp_map",
    "f_psr",
    "f_sr",
    "fiber_of",
    "frechet_mean_diag",
    "frechet_mean_so",
    "geodesic",
    "le_coordinates",
    "le_mean",
    "log_map",
    "mean_orbit",
    "minimize_fsr_lower",
    "psr_coordinates",
    "psr_mean",
    "r_cx",
    "rot_log",
    "sample_model_2d",
    "sample_spd_lognormal",
    "two_group_report",
    "vecd",
    "vectorize",
]
