"""Helper utility functions."""

import itertools
import math
from typing import Any, Iterable, List, Sequence

import numpy as np
from scipy.stats import norm, qmc


def halton_points(count: int, dimension: int, skip: int = 1) -> np.ndarray:
    """Deterministic Halton points in the open unit cube.

    Args:
        count: Number of points
        dimension: Dimension of each point
        skip: Leading points to drop (the first Halton point is the origin)

    Returns:
        Array of shape (count, dimension)
    """
    engine = qmc.Halton(d=dimension, scramble=False)
    if skip:
        engine.fast_forward(skip)
    return engine.random(count)


def sphere_samples(dimension: int, count: int) -> np.ndarray:
    """Deterministic, roughly uniform points on the unit sphere of R^dimension.

    Args:
        dimension: Ambient dimension (1 gives the two points +-1)
        count: Requested number of points (ignored for dimension 1)

    Returns:
        Array of shape (m, dimension) of unit vectors
    """
    if dimension == 1:
        return np.array([[1.0], [-1.0]])
    if dimension == 2:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if dimension == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = np.pi * (3.0 - math.sqrt(5.0)) * k
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    gauss = norm.ppf(halton_points(count, dimension))
    return gauss / np.linalg.norm(gauss, axis=-1, keepdims=True)


def tangent_basis(direction: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of a unit vector.

    Args:
        direction: Unit vector of length d

    Returns:
        Array of shape (d - 1, d) whose rows span the orthogonal complement
    """
    d = direction.shape[0]
    if d == 1:
        return np.zeros((0, 1))
    # Householder-free construction: QR of [direction | I]
    q, _ = np.linalg.qr(np.column_stack([direction, np.eye(d)]))
    basis = q[:, 1:d].T
    return basis - np.outer(basis @ direction, direction)


def geometric_times(start: float, stop: float, count: int) -> List[float]:
    """Geometrically spaced checkpoint times, denser near zero.

    Args:
        start: First time (> 0)
        stop: Last time (>= start)
        count: Number of times

    Returns:
        List of times rounded to 12 significant digits
    """
    if count == 1:
        return [float(stop)]
    values = np.geomspace(start, stop, count)
    return [float(f"{v:.12g}") for v in values]


def lexicographic_translates(dimension: int, reach: int = 1) -> np.ndarray:
    """All integer vectors in {-reach..reach}^dimension in lexicographic order."""
    axis = range(-reach, reach + 1)
    return np.array(list(itertools.product(axis, repeat=dimension)), dtype=float)


def json_ready(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values.

    Args:
        value: Arbitrary nested structure

    Returns:
        Structure of dicts, lists, str, int, float and None
    """
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def format_table(rows: Iterable[Sequence[Any]], headers: Sequence[str]) -> str:
    """Format rows as a fixed-width text table.

    Args:
        rows: Table rows
        headers: Column headers

    Returns:
        Table text with a header rule
    """
    cells = [[_format_cell(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def _format_cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    if isinstance(value, bool):
        return "PASS" if value else "FAIL"
    return str(value)
