"""Blow-up time bounds for heat flow with a nonlinear Neumann boundary patch."""

from .geometry import (
    BoundaryPartition,
    ConvexDomain,
    QuadratureSpec,
    ball3d,
    boundary_point,
    boundary_quadrature,
    disk,
    ellipse,
    full_boundary,
    gamma1_measure,
    parse_domain,
    parse_partition,
    rectangle,
    volume_quadrature,
)
from .kernel import (
    KernelConstants,
    boundary_gaussian,
    compute_constants,
    convex_identity_residual,
    domain_mass,
    estimate_B1,
    estimate_b1,
    holder_bound,
    phi,
)
from .bounds import (
    BoundsInput,
    BoundsReport,
    SequenceTrace,
    build_sequence,
    compute_report,
    delta1,
    e_q,
    lower_bound_closed,
    lower_bound_constructive,
    lower_bound_log,
    maximize_affine_power,
    solve_lambda,
    step_count_lower_bound,
    upper_bound,
)

__version__ = "0.1.0"
