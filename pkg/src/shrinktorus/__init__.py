"""Validated numerics for the self-shrinking torus.

Locates the rotationally symmetric self-shrinking torus by a two-sided
shooting method with a cylinder compatibility condition, certifies
equation residuals of the located profile, replays the reference
Gronwall-Bellman constant chains with certified quadrature, and verifies
triviality of the stability-operator kernels on the six boundary pieces
of the sphere-torus union.
"""

from .config import RunConfig, load_config
from .geometry import (
    Chart,
    CurveState,
    GeomQuantities,
    ProfileSegment,
    geom_quantities,
    residual_sup,
)
from .gronwall import (
    BoundLedger,
    CurveData,
    EnvelopeSpec,
    gronwall_bound,
    propagate_stage,
    replay_ledger,
    upper_integral,
    verify_envelopes,
)
from .jacobi import (
    EndpointMatrix,
    ModeProblem,
    ModeSolution,
    endpoint_matrix,
    integrate_mode,
    kernel_verdict,
    mode_cutoff,
    stability_apply,
    sturm_zero_check,
)
from .shooting import (
    HalfProfile,
    ShotTrajectory,
    TorusCertificate,
    angle_mismatch,
    build_half_profile,
    crossing_map,
    find_torus,
    integrate_shot,
    invert_crossing,
)
from .sphere import LegendrePair, legendre_eval, sphere_kernel_check

__version__ = "1.0.0"

__all__ = [
    "BoundLedger", "Chart", "CurveData", "CurveState", "EndpointMatrix",
    "EnvelopeSpec", "GeomQuantities", "HalfProfile", "LegendrePair",
    "ModeProblem", "ModeSolution", "ProfileSegment", "RunConfig",
    "ShotTrajectory", "TorusCertificate", "angle_mismatch",
    "build_half_profile", "crossing_map", "endpoint_matrix", "find_torus",
    "geom_quantities", "gronwall_bound", "integrate_mode", "integrate_shot",
    "invert_crossing", "kernel_verdict", "legendre_eval", "load_config",
    "mode_cutoff", "propagate_stage", "replay_ledger", "residual_sup",
    "sphere_kernel_check", "stability_apply", "sturm_zero_check",
    "upper_integral", "verify_envelopes",
]
