"""Embed a planar Finsler patch isometrically into a torus without conjugate points.

The construction goes through enveloping functions: the signed distance to the
geodesic fan through a basepoint is glued to the flat field of a constant norm
with bump functions, and the metric is recovered from the glued field.
"""

from .config import PipelineConfig
from .envelope import (
    EnvelopeField,
    RecoveredMetric,
    build_envelope,
    busemann,
    check_enveloping,
    finsler_gradient,
    recover_distance,
    recover_norm,
)
from .errors import (
    ConfigurationError,
    FinslerError,
    InvalidArgument,
    InvalidState,
    NumericalFailure,
    SingularityError,
)
from .geodesics import (
    ConformalChart,
    ConstantChart,
    FinslerChart,
    GeodesicPath,
    chart_from_spec,
    check_simple,
    distance,
    shoot,
    sphere_cap_chart,
)
from .glue import BumpProfile, TorusMetric, blend, extend_envelope, extend_reference, make_bump, periodize, run_pipeline, symmetrize
from .norms import (
    EuclideanNorm,
    MinkowskiNorm,
    RandersNorm,
    TabulatedNorm,
    check_quadratic_convexity,
    cosphere,
    dual_norm,
    fundamental_tensor,
    norm_from_spec,
)
from .verify import VerificationReport, conjugate_scan, verify_all

__version__ = "0.1.0"
