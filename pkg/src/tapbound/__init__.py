"""Desk-scale numerical verification of TAP upper bounds for mixed p-spin models."""

from .covariance import CovarianceSeries, RecenteredSeries, onsager, xi_eval, xi_recenter
from .entropy import (
    binary_entropy,
    general_entropy_upper,
    halfspace_log_mass,
    ising_entropy,
    ising_uniform,
    lambda_min_entropy,
    point_cloud,
    sphere_uniform,
    spherical_entropy,
)
from .errors import (
    ConfigError,
    DomainError,
    InvariantViolationError,
    ResourceBudgetError,
    UnsupportedOperationError,
)
from .hamiltonian import (
    DisorderSample,
    ExternalField,
    MixedModel,
    effective_field,
    energy,
    field_custom,
    field_linear,
    field_none,
    field_quadratic_spike,
    gradient,
    recentered_energy,
    sample_disorder,
)
from .partition import (
    PartitionEstimate,
    log_partition_exact_ising,
    log_partition_mc_sphere,
    restricted_log_partition,
    slice_measures,
)
from .tap import TapProblem, brute_force_tap_max, maximize_tap, tap_energy, tap_gradient

__version__ = "0.1.0"
