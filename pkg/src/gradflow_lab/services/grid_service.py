"""Finite-difference stencils, lattice metric and snapshot I/O for grid functions."""

import itertools
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from ..config.logging_config import get_logger
from ..core.exceptions import DomainError
from ..models.grid import BoundaryCondition, DomainKind, DomainSpec, GridFunction, LatticeSpec

logger = get_logger(__name__)

PathLike = Union[str, Path]

BINARY_MAGIC = "# gradflow-grid"


def minimal_image(x: Sequence[float], y: Sequence[float], lattice: LatticeSpec) -> np.ndarray:
    """Shortest lattice translate of ``y - x``.

    Ties are broken by the lexicographic order of the translate's integer coordinates.

    Args:
        x: Point in the fundamental cell
        y: Point in the fundamental cell
        lattice: Periodicity lattice

    Returns:
        Displacement vector y - x + j for the minimizing lattice vector j
    """
    generators = lattice.matrix
    displacement = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    scale = max(1.0, float(np.max(np.abs(generators))))

    best = displacement
    best_length = np.inf
    for coefficients in itertools.product(range(-2, 3), repeat=lattice.dimension):
        candidate = displacement + np.asarray(coefficients, dtype=float) @ generators
        length = float(np.linalg.norm(candidate))
        if length < best_length - 1e-12 * scale:
            best, best_length = candidate, length
    return best


def minimal_image_batch(displacements: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """Minimal images of many displacement vectors, shape ``(m, n)``.

    Ties are broken like ``minimal_image``: the shifts are scanned in lexicographic order and
    the first one within the scalar version's length tolerance of the minimum wins.
    """
    generators = lattice.matrix
    fractional = displacements @ lattice.inverse
    reduced = (fractional - np.round(fractional)) @ generators
    scale = max(1.0, float(np.max(np.abs(generators))))

    shifts = np.array(list(itertools.product((-1, 0, 1), repeat=lattice.dimension)), dtype=float)
    candidates = reduced[:, None, :] + (shifts @ generators)[None, :, :]
    lengths = np.linalg.norm(candidates, axis=-1)
    shortest = np.min(lengths, axis=1, keepdims=True)
    choice = np.argmax(lengths <= shortest + 1e-12 * scale, axis=1)
    return candidates[np.arange(len(reduced)), choice]


def pad_values(values: np.ndarray, domain: DomainSpec, width: int = 1) -> np.ndarray:
    """Pad a sample array with ghost layers matching the boundary condition."""
    if domain.is_periodic:
        return np.pad(values, width, mode="wrap")
    if domain.kind is DomainKind.RECTANGLE and domain.boundary is BoundaryCondition.NEUMANN:
        # ghost u_{-1} = u_1 gives a zero central difference across each face
        return np.pad(values, width, mode="reflect")
    return np.pad(values, width, mode="edge")


def _shifted(padded: np.ndarray, offset: Sequence[int], shape: Tuple[int, ...]) -> np.ndarray:
    return padded[tuple(slice(1 + o, 1 + o + s) for o, s in zip(offset, shape))]


def derivative_fields(values: np.ndarray, domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient and Hessian at every sample.

    Args:
        values: Sample array of the domain's shape
        domain: Domain providing spacing, ghost rule and lattice transform

    Returns:
        Tuple ``(gradient, hessian)`` of shapes ``(*shape, n)`` and ``(*shape, n, n)``
    """
    shape = domain.shape
    n = domain.dimension
    h = domain.spacing
    padded = pad_values(values, domain)
    center = _shifted(padded, (0,) * n, shape)

    gradient = np.empty(shape + (n,))
    hessian = np.empty(shape + (n, n))
    for i in range(n):
        unit = [0] * n
        unit[i] = 1
        forward = _shifted(padded, unit, shape)
        unit[i] = -1
        backward = _shifted(padded, unit, shape)
        gradient[..., i] = (forward - backward) / (2.0 * h[i])
        hessian[..., i, i] = (forward - 2.0 * center + backward) / (h[i] * h[i])

    for i, j in itertools.combinations(range(n), 2):
        corners = []
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            offset = [0] * n
            offset[i], offset[j] = si, sj
            corners.append(_shifted(padded, offset, shape))
        mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4.0 * h[i] * h[j])
        hessian[..., i, j] = mixed
        hessian[..., j, i] = mixed

    if domain.is_periodic and not np.allclose(domain.transform, np.diag(np.diag(domain.transform))):
        transform = domain.transform
        gradient = np.einsum("ij,...j->...i", transform, gradient)
        hessian = np.einsum("ik,...kl,jl->...ij", transform, hessian, transform)
        hessian = 0.5 * (hessian + np.swapaxes(hessian, -1, -2))
    elif domain.is_periodic:
        scale = np.diag(domain.transform)
        gradient = gradient * scale
        hessian = hessian * scale[:, None] * scale[None, :]
    return gradient, hessian


def elliptic_contraction(
    values: np.ndarray, domain: DomainSpec, matrices: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """a^{ij} D_ij u with nonnegative neighbour weights wherever A is diagonally dominant.

    The coefficients are pulled back to stencil coordinates as B = T^T A T. Each mixed term
    b_ij uses the diagonal second difference along (e_i + e_j) when b_ij >= 0 and along
    (e_i - e_j) otherwise, with the axis weights reduced by |b_ij| h_i / h_j to stay
    consistent. Where some reduced axis weight turns negative the four-corner central
    stencil is used instead.

    Args:
        values: Sample array of the domain's shape
        domain: Domain providing spacing, ghost rule and lattice transform
        matrices: Coefficient matrices in space coordinates, shape ``(*shape, n, n)``

    Returns:
        Tuple ``(contraction, monotone)``; ``monotone`` marks samples using the
        positive-weight stencil
    """
    shape = domain.shape
    n = domain.dimension
    h = domain.spacing
    transform = domain.transform
    coefficients = np.einsum("ki,...kl,lj->...ij", transform, matrices, transform)
    coefficients = 0.5 * (coefficients + np.swapaxes(coefficients, -1, -2))

    padded = pad_values(values, domain)
    center = _shifted(padded, (0,) * n, shape)

    def diagonal(i: int, j: int, sign: int) -> np.ndarray:
        ahead = [0] * n
        ahead[i], ahead[j] = 1, sign
        behind = [-o for o in ahead]
        return _shifted(padded, ahead, shape) - 2.0 * center + _shifted(padded, behind, shape)

    second = []
    for i in range(n):
        unit = [0] * n
        unit[i] = 1
        forward = _shifted(padded, unit, shape)
        unit[i] = -1
        backward = _shifted(padded, unit, shape)
        second.append((forward - 2.0 * center + backward) / (h[i] * h[i]))

    weights = [coefficients[..., i, i].copy() for i in range(n)]
    central = sum(coefficients[..., i, i] * second[i] for i in range(n))
    monotone = np.zeros(shape)
    for i, j in itertools.combinations(range(n), 2):
        b = coefficients[..., i, j]
        along = diagonal(i, j, 1)
        across = diagonal(i, j, -1)
        central = central + b * (along - across) / (2.0 * h[i] * h[j])
        monotone = monotone + np.abs(b) * np.where(b >= 0.0, along, across) / (h[i] * h[j])
        weights[i] -= np.abs(b) * h[i] / h[j]
        weights[j] -= np.abs(b) * h[j] / h[i]
    monotone = monotone + sum(w * d for w, d in zip(weights, second))

    scale = np.max(np.abs(coefficients), axis=(-2, -1))
    dominant = np.all(np.stack(weights) >= -1e-12 * scale, axis=0)
    return np.where(dominant, monotone, central), dominant


def gradient_field(u: GridFunction) -> np.ndarray:
    """Gradient at every sample; one-sided second-order differences at bounded faces."""
    domain = u.domain
    if domain.is_periodic:
        return derivative_fields(u.values, domain)[0]
    parts = np.gradient(u.values, *domain.spacing, edge_order=2)
    if domain.dimension == 1:
        parts = [parts]
    return np.stack(parts, axis=-1)


def _normalize_index(u: GridFunction, index: Sequence[int], interior_only: bool) -> Tuple[int, ...]:
    domain = u.domain
    index = tuple(int(i) for i in np.atleast_1d(index))
    if len(index) != domain.dimension:
        raise IndexError(f"index {index} has wrong dimension for {domain.describe()}")
    if domain.is_periodic:
        return tuple(i % s for i, s in zip(index, domain.shape))
    if any(i < 0 or i >= s for i, s in zip(index, domain.shape)):
        raise IndexError(f"index {index} out of range for shape {domain.shape}")
    if interior_only and not domain.interior_mask()[index]:
        raise IndexError(f"index {index} is not an interior sample")
    if domain.kind is DomainKind.DISK and not domain.interior_mask()[index]:
        raise IndexError(f"index {index} lies outside the disk")
    return index


def gradient(u: GridFunction, index: Sequence[int]) -> np.ndarray:
    """Gradient Du at one sample."""
    index = _normalize_index(u, index, interior_only=False)
    return gradient_field(u)[index]


def hessian(u: GridFunction, index: Sequence[int]) -> np.ndarray:
    """Symmetric Hessian D^2u at one sample."""
    index = _normalize_index(u, index, interior_only=True)
    return derivative_fields(u.values, u.domain)[1][index]


def oscillation(u: GridFunction) -> float:
    """Oscillation max u - min u over the domain's samples."""
    values = u.sample_values()
    return float(np.max(values) - np.min(values))


@lru_cache(maxsize=32)
def neumann_ghost_map(domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Flat indices of disk ghost samples and the interior samples they copy.

    Each ghost takes the value of the interior sample nearest to its mirror image across the
    circle.
    """
    coords = domain.coordinates().reshape(-1, domain.dimension)
    interior = np.flatnonzero(domain.interior_mask().ravel())
    ring = np.flatnonzero(domain.ring_mask().ravel())
    center = np.array(domain.center)

    offsets = coords[ring] - center
    radii = np.linalg.norm(offsets, axis=1)
    foot = center + offsets * (domain.radius / radii)[:, None]
    mirror = 2.0 * foot - coords[ring]

    # nearest interior sample: round to the grid, then scan the 3^n block for the closest interior
    k = np.rint((mirror - domain.origin) / domain.spacing).astype(int)
    inside = domain.interior_mask()
    sources = np.empty(len(ring), dtype=int)
    for r, base in enumerate(k):
        best, best_distance = -1, np.inf
        for reach in (1, 2, 3):
            for offset in itertools.product(range(-reach, reach + 1), repeat=domain.dimension):
                candidate = np.clip(base + np.array(offset), 0, np.array(domain.shape) - 1)
                if not inside[tuple(candidate)]:
                    continue
                flat = int(np.ravel_multi_index(tuple(candidate), domain.shape))
                distance = float(np.linalg.norm(coords[flat] - mirror[r]))
                if distance < best_distance:
                    best, best_distance = flat, distance
            if best >= 0:
                break
        if best < 0:
            best = int(interior[np.argmin(np.linalg.norm(coords[interior] - mirror[r], axis=1))])
        sources[r] = best
    return ring, sources


def apply_boundary_condition(values: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Re-impose the domain's boundary condition on a sample array (returns a new array)."""
    result = np.array(values, dtype=float)
    if domain.is_periodic:
        return result
    if domain.boundary is BoundaryCondition.DIRICHLET:
        result[~domain.interior_mask()] = 0.0
        return result
    if domain.kind is DomainKind.DISK:
        ring, sources = neumann_ghost_map(domain)
        flat = result.reshape(-1)
        flat[~domain.sample_mask().reshape(-1)] = 0.0
        flat[ring] = flat[sources]
    return result


# Snapshot I/O


def save_csv(u: GridFunction, path: PathLike) -> int:
    """Write the domain's samples as CSV rows (indices, coordinates, value).

    Returns:
        Number of data rows written
    """
    domain = u.domain
    n = domain.dimension
    mask = domain.sample_mask()
    indices = np.argwhere(mask)
    coords = domain.coordinates()[mask]
    values = u.values[mask]
    table = np.column_stack([indices, coords, values])

    columns = [f"i{k}" for k in range(n)] + [f"x{k}" for k in range(n)] + ["value"]
    shape = ",".join(str(s) for s in domain.shape)
    header = f"# t={u.time!r} shape={shape}\n" + ",".join(columns)
    fmt = ["%d"] * n + ["%.17g"] * (n + 1)

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(target, table, fmt=fmt, delimiter=",", header=header, comments="")
    return int(table.shape[0])


def _parse_header(line: str) -> Tuple[float, Tuple[int, ...]]:
    fields = dict(part.split("=", 1) for part in line.strip().lstrip("#").split() if "=" in part)
    try:
        time = float(fields["t"])
        shape = tuple(int(s) for s in fields["shape"].split(","))
    except (KeyError, ValueError) as e:
        raise DomainError(f"malformed snapshot header: {line.strip()!r}") from e
    return time, shape


def load_csv(path: PathLike, domain: DomainSpec) -> GridFunction:
    """Read a CSV snapshot written by :func:`save_csv` back onto ``domain``."""
    source = Path(path)
    with source.open("r", encoding="utf-8") as handle:
        time, shape = _parse_header(handle.readline())
    if shape != domain.shape:
        raise DomainError(f"snapshot shape {shape} does not match grid shape {domain.shape}")

    table = np.loadtxt(source, delimiter=",", skiprows=2, ndmin=2)
    n = domain.dimension
    values = np.zeros(domain.shape)
    index = tuple(table[:, k].astype(int) for k in range(n))
    values[index] = table[:, -1]
    return GridFunction(domain, apply_boundary_condition(values, domain), time)


def save_binary(u: GridFunction, path: PathLike) -> None:
    """Write an ASCII header line followed by little-endian float64 row-major values."""
    shape = ",".join(str(s) for s in u.domain.shape)
    header = f"{BINARY_MAGIC} t={u.time!r} shape={shape}\n".encode("ascii")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(header + u.values.astype("<f8").tobytes(order="C"))


def load_binary(path: PathLike, domain: DomainSpec) -> GridFunction:
    """Read a binary snapshot written by :func:`save_binary`."""
    payload = Path(path).read_bytes()
    newline = payload.find(b"\n")
    if newline < 0 or not payload.startswith(BINARY_MAGIC.encode("ascii")):
        raise DomainError(f"{path} is not a gradflow binary snapshot")
    time, shape = _parse_header(payload[:newline].decode("ascii").replace(BINARY_MAGIC, ""))
    if shape != domain.shape:
        raise DomainError(f"snapshot shape {shape} does not match grid shape {domain.shape}")
    values = np.frombuffer(payload[newline + 1 :], dtype="<f8")
    if values.size != int(np.prod(shape)):
        raise DomainError(f"{path} holds {values.size} values, expected {int(np.prod(shape))}")
    return GridFunction(domain, values.reshape(shape).astype(float), time)
