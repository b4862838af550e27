"""Utility functions for gradflow-lab."""

from .helpers import (
    format_table,
    geometric_times,
    halton_points,
    json_ready,
    lexicographic_translates,
    sphere_samples,
    tangent_basis,
)
from .validators import (
    validate_exponent,
    validate_finite_array,
    validate_scenario_name,
    validate_symmetric_positive_definite,
)

__all__ = [
    "format_table",
    "geometric_times",
    "halton_points",
    "json_ready",
    "lexicographic_translates",
    "sphere_samples",
    "tangent_basis",
    "validate_exponent",
    "validate_finite_array",
    "validate_scenario_name",
    "validate_symmetric_positive_definite",
]
