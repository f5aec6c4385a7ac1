"""Diagnostics of trajectories and trained models."""

from .distributions import (
    DensityAccumulator,
    Histogram,
    LaminarDistribution,
    density_histogram,
    density_l1,
    ks_distance,
    laminar_lasting_times,
    laminar_runs,
    poincare_like_section,
    read_section_csv,
    section_coverage,
    write_section_csv,
)
from .fixedpoints import (
    FixedPointResult,
    find_fixed_point,
    fixed_point_delta,
    shadow_periodic_orbit,
    shadow_trajectory,
)
from .jacobian import (
    MONOMIALS,
    JacobianField,
    derivative6,
    eigen3,
    field_from_rhs,
    fit_jacobian_field,
    jacobian_at,
    monomial_names,
)
from .lyapunov import (
    CLVSet,
    LyapunovReport,
    angle_distribution,
    clv_angles,
    covariant_lyapunov_vectors,
    kaplan_yorke,
    lyapunov_spectrum,
)
from .wolf import WolfParams, WolfResult, wolf_lambda1

__all__ = [
    "CLVSet", "DensityAccumulator", "FixedPointResult", "Histogram", "JacobianField",
    "LaminarDistribution", "LyapunovReport", "MONOMIALS", "WolfParams", "WolfResult",
    "angle_distribution", "clv_angles", "covariant_lyapunov_vectors", "density_histogram",
    "density_l1", "derivative6", "eigen3", "field_from_rhs", "find_fixed_point",
    "fit_jacobian_field", "fixed_point_delta", "jacobian_at", "kaplan_yorke", "ks_distance",
    "laminar_lasting_times", "laminar_runs", "lyapunov_spectrum", "monomial_names",
    "poincare_like_section", "read_section_csv", "section_coverage", "shadow_periodic_orbit", "shadow_trajectory",
    "wolf_lambda1", "write_section_csv",
]
