"""Validation utility functions."""

import re
from typing import Any

import numpy as np


def validate_finite_array(values: Any) -> bool:
    """Validate that an array-like holds only finite reals.

    Args:
        values: Array-like to validate

    Returns:
        True if every entry is finite
    """
    try:
        array = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        return False
    return bool(np.all(np.isfinite(array)))


def validate_symmetric_positive_definite(matrix: Any, tol: float = 1e-12) -> bool:
    """Validate a symmetric positive definite matrix.

    Args:
        matrix: Square array-like
        tol: Symmetry tolerance relative to the largest entry

    Returns:
        True if symmetric with strictly positive eigenvalues
    """
    if not validate_finite_array(matrix):
        return False
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > tol * scale:
        return False
    return bool(np.linalg.eigvalsh(m)[0] > 0.0)


def validate_exponent(p: Any) -> bool:
    """Validate a p-Laplacian exponent (p > 1)."""
    return isinstance(p, (int, float)) and np.isfinite(p) and p > 1.0


def validate_scenario_name(name: Any) -> bool:
    """Validate scenario name format.

    Args:
        name: Scenario name to validate

    Returns:
        True if it starts with a lowercase letter, uses only lowercase letters, digits and
        ``_-.=`` (sweep variants), and has at most 120 characters
    """
    if not isinstance(name, str):
        return False
    return bool(re.match(r"^[a-z][a-z0-9_.=\-]*$", name)) and len(name) <= 120
