"""Explicit time stepping, checkpointing and initial-data recipes."""

import itertools
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.ndimage import correlate

from ..config.logging_config import get_logger
from ..core.exceptions import ConfigurationError, InstabilityError
from ..models.coefficients import CoefficientModel
from ..models.grid import BoundaryCondition, DomainKind, DomainSpec, GridFunction
from ..models.run import CheckpointDiagnostics, EvolutionRun
from ..utils.helpers import geometric_times
from .grid_service import (
    apply_boundary_condition,
    derivative_fields,
    elliptic_contraction,
    gradient_field,
    load_binary,
    load_csv,
    oscillation,
)

logger = get_logger(__name__)

FieldFn = Callable[[np.ndarray], np.ndarray]


def observed_lambda(model: CoefficientModel, u: GridFunction) -> float:
    """Largest eigenvalue of A(Du, t) over the updated samples."""
    grad, _ = derivative_fields(u.values, u.domain)
    matrices = model.matrix(grad[u.domain.interior_mask()], u.time)
    if matrices.size == 0:
        return 0.0
    if u.domain.dimension == 1:
        return float(np.max(matrices[..., 0, 0]))
    return float(np.max(np.linalg.eigvalsh(matrices)[..., -1]))


def stable_time_step(run: EvolutionRun) -> float:
    """sigma h_min^2 / (2 n Lambda_obs), infinite when the coefficients vanish."""
    lam = observed_lambda(run.model, run.state)
    run.lambda_obs = lam
    if not np.isfinite(lam):
        raise InstabilityError(
            f"{run.label}: coefficient eigenvalue is not finite at t={run.time:.6g}",
            {"time": run.time, "lambda_obs": lam},
        )
    if lam <= 1e-300:
        return np.inf
    h = run.domain.h_min
    return run.cfl_safety * h * h / (2.0 * run.domain.dimension * lam)


def rate(model: CoefficientModel, values: np.ndarray, domain: DomainSpec, t: float) -> np.ndarray:
    """Right-hand side a^{ij}(Du, t) D_ij u + b(Du, t) at every sample.

    The second-order part uses the positive-weight stencil of ``elliptic_contraction``, so a
    step within the CFL bound is a convex combination of neighbours wherever A is diagonally
    dominant.
    """
    grad, _ = derivative_fields(values, domain)
    contraction, _ = elliptic_contraction(values, domain, model.matrix(grad, t))
    return contraction + model.drift(grad, t)


def _advance(run: EvolutionRun, dt: float) -> np.ndarray:
    u = run.state
    update = rate(run.model, u.values, run.domain, u.time)
    interior = run.domain.interior_mask()
    fresh = u.values.copy()
    fresh[interior] = u.values[interior] + dt * update[interior]
    fresh = apply_boundary_condition(fresh, run.domain)
    if not np.all(np.isfinite(fresh)):
        grad = gradient_field(u)
        diagnostics = {
            "time": u.time,
            "dt": dt,
            "step": run.steps,
            "lambda_obs": run.lambda_obs,
            "max_gradient": float(np.max(np.linalg.norm(grad, axis=-1))),
        }
        logger.error(f"{run.label}: non-finite update at t={u.time:.6g} ({diagnostics})")
        raise InstabilityError(
            f"{run.label}: explicit step produced non-finite values", diagnostics
        )
    return fresh


def step(run: EvolutionRun, dt: Optional[float] = None) -> EvolutionRun:
    """One explicit Euler step u <- u + dt (a^{ij} D_ij u + b) with boundary conditions re-imposed.

    The previous buffer is read and a fresh buffer written; ``run.state`` is replaced.
    """
    if dt is None:
        dt = stable_time_step(run)
        if not np.isfinite(dt):
            # vanishing coefficients: the state is a fixed point
            return run
    fresh = _advance(run, dt)
    run.state = GridFunction(run.domain, fresh, run.time + dt)
    run.steps += 1
    run.dt = dt
    run.dt_history.append(dt)
    return run


def cell_volume(domain: DomainSpec) -> float:
    if domain.is_periodic:
        assert domain.lattice is not None
        return float(abs(np.linalg.det(domain.lattice.matrix)) / np.prod(domain.resolution))
    return float(np.prod(domain.spacing))


def _statistics_mask(domain: DomainSpec, exclude_boundary_layer: bool) -> np.ndarray:
    mask = domain.interior_mask()
    if not exclude_boundary_layer or domain.boundary is not BoundaryCondition.DIRICHLET:
        return mask
    # drop the cell ring next to the boundary
    padded = np.pad(mask, 1, mode="constant")
    kept = mask.copy()
    for offset in itertools.product((-1, 0, 1), repeat=domain.dimension):
        index = tuple(slice(1 + o, 1 + o + s) for o, s in zip(offset, domain.shape))
        kept &= padded[index]
    return kept


def checkpoint_diagnostics(
    model: CoefficientModel, u: GridFunction, steps: int = 0, exclude_boundary_layer: bool = True
) -> CheckpointDiagnostics:
    grad = gradient_field(u)
    mask = _statistics_mask(u.domain, exclude_boundary_layer)
    magnitudes = np.linalg.norm(grad[mask], axis=-1)
    energy = float(np.sum(model.energy_density(grad[u.domain.interior_mask()])))
    values = u.sample_values()
    return CheckpointDiagnostics(
        time=u.time,
        max_gradient=float(np.max(magnitudes)) if magnitudes.size else 0.0,
        oscillation=oscillation(u),
        energy=energy * cell_volume(u.domain),
        minimum=float(np.min(values)),
        maximum=float(np.max(values)),
        steps=steps,
    )


def _record(run: EvolutionRun, snapshot: GridFunction) -> None:
    run.snapshots.append(snapshot)
    diagnostics = checkpoint_diagnostics(
        run.model, snapshot, run.steps, run.exclude_boundary_layer
    )
    run.diagnostics.append(diagnostics)
    logger.debug(
        f"{run.label}: t={snapshot.time:.6g} max|Du|={diagnostics.max_gradient:.6g} "
        f"osc={diagnostics.oscillation:.6g}"
    )


def run_to(run: EvolutionRun, t_end: float) -> EvolutionRun:
    """Step until ``t_end``, re-evaluating dt every ``refresh_interval`` steps.

    Checkpoints falling inside a step are linearly interpolated between the bracketing states.
    """
    if t_end < run.time:
        raise ConfigurationError(f"t_end={t_end} lies before the current time {run.time}")
    while run.pending_checkpoints and run.pending_checkpoints[0] <= run.time + 1e-15:
        _record(run, run.state.with_values(run.state.values, run.pending_checkpoints[0]))
    if t_end == run.time:
        return run

    logger.info(
        f"{run.label}: evolving {run.domain.describe()} from t={run.time:.6g} to {t_end:.6g}"
    )
    dt = stable_time_step(run)
    since_refresh = 0
    while run.time < t_end * (1.0 - 1e-14):
        if since_refresh >= run.refresh_interval:
            dt = stable_time_step(run)
            since_refresh = 0
        if run.max_steps is not None and run.steps >= run.max_steps:
            raise InstabilityError(
                f"{run.label}: step budget {run.max_steps} exhausted at t={run.time:.6g}",
                {"time": run.time, "dt": dt, "steps": run.steps},
            )
        remaining = t_end - run.time
        previous = run.state
        step(run, min(dt, remaining))
        since_refresh += 1

        for checkpoint in list(run.pending_checkpoints):
            if checkpoint > run.time * (1.0 + 1e-14):
                break
            span = run.time - previous.time
            weight = 1.0 if span <= 0.0 else (checkpoint - previous.time) / span
            values = (1.0 - weight) * previous.values + weight * run.state.values
            _record(run, GridFunction(run.domain, values, checkpoint))

    logger.info(f"{run.label}: reached t={run.time:.6g} after {run.steps} steps")
    if not (run.oscillation_monotone() and run.extremes_monotone()):
        logger.warning(
            f"{run.label}: discrete maximum principle violated over the checkpoints "
            f"(oscillation monotone: {run.oscillation_monotone()}, "
            f"extremes monotone: {run.extremes_monotone()})"
        )
    return run


# Initial data


def sample_field(domain: DomainSpec, fn: FieldFn, time: float = 0.0) -> GridFunction:
    """Sample a closed-form field at the grid points, zeroing Dirichlet boundary samples."""
    values = np.asarray(fn(domain.coordinates()), dtype=float)
    values = np.where(domain.sample_mask(), values, 0.0)
    return GridFunction(domain, apply_boundary_condition(values, domain), time)


def _fractional(domain: DomainSpec, axis: int) -> np.ndarray:
    """Position along an axis as a fraction of the cell or box."""
    index = np.indices(domain.shape)[axis].astype(float)
    if domain.is_periodic:
        return index / domain.shape[axis]
    return index / domain.resolution[axis]


def make_square_wave(domain: DomainSpec, axis: int = 0, amplitude: float = 1.0) -> GridFunction:
    """+M/2 on the first half-cell along ``axis`` and -M/2 on the second; oscillation M."""
    if not 0 <= axis < domain.dimension:
        raise ConfigurationError(f"axis {axis} out of range for dimension {domain.dimension}")
    fraction = _fractional(domain, axis)
    values = np.where(fraction < 0.5, 0.5 * amplitude, -0.5 * amplitude)
    values = np.where(domain.sample_mask(), values, 0.0)
    return GridFunction(domain, apply_boundary_condition(values, domain))


def product_sines(
    domain: DomainSpec, modes: Optional[Sequence[int]] = None, amplitude: float = 1.0
) -> GridFunction:
    """M prod sin(pi k_i s_i) on boxes so the faces vanish, M prod sin(2 pi k_i s_i) on cells."""
    modes = list(modes) if modes is not None else [1] * domain.dimension
    if len(modes) != domain.dimension:
        raise ConfigurationError("one mode per axis is required")
    factor = 2.0 * np.pi if domain.is_periodic else np.pi
    values = np.full(domain.shape, float(amplitude))
    for axis, k in enumerate(modes):
        values = values * np.sin(factor * k * _fractional(domain, axis))
    values = np.where(domain.sample_mask(), values, 0.0)
    return GridFunction(domain, apply_boundary_condition(values, domain))


def sine_wave(
    domain: DomainSpec, axis: int = 0, mode: int = 1, amplitude: float = 1.0
) -> GridFunction:
    """M sin(2 pi k s) along one lattice direction."""
    values = amplitude * np.sin(2.0 * np.pi * mode * _fractional(domain, axis))
    values = np.where(domain.sample_mask(), values, 0.0)
    return GridFunction(domain, apply_boundary_condition(values, domain))


def radial_cap(
    domain: DomainSpec, amplitude: float = 1.0, width: Optional[float] = None
) -> GridFunction:
    """Plateau of height M around the disk center, falling linearly to 0 over ``width``."""
    if domain.kind is not DomainKind.DISK:
        raise ConfigurationError("radial cap initial data needs a disk domain")
    width = 0.5 * domain.radius if width is None else float(width)
    r = np.linalg.norm(domain.coordinates() - np.array(domain.center), axis=-1)
    return sample_field(
        domain, lambda _: amplitude * np.clip((domain.radius - r) / width, 0.0, 1.0)
    )


def cone(
    domain: DomainSpec, center: Sequence[float], slope: float, base: float = 0.0
) -> GridFunction:
    """base + slope |x - x0| in Euclidean distance."""
    x0 = np.asarray(center, dtype=float)
    return sample_field(domain, lambda x: base + slope * np.linalg.norm(x - x0, axis=-1))


def load_initial(path: Union[str, Path], domain: DomainSpec) -> GridFunction:
    """Initial data from a CSV or binary snapshot on the same grid."""
    source = Path(path)
    if source.suffix == ".csv":
        u = load_csv(source, domain)
    else:
        u = load_binary(source, domain)
    return GridFunction(domain, u.values, 0.0)


def geometric_checkpoints(start: float, stop: float, count: int) -> List[float]:
    return geometric_times(start, stop, count)


# Mollification


def bump_kernel(domain: DomainSpec, radius: float) -> np.ndarray:
    """Discrete rho(x / r) with rho(z) ~ exp(-1 / (1 - |z|^2)), normalised to unit mass."""
    if not radius > 0.0:
        raise ConfigurationError("mollifier radius must be positive")
    reach = np.ceil(radius / domain.physical_spacing).astype(int)
    if np.any(2 * reach + 1 > np.array(domain.shape)):
        raise ConfigurationError(
            f"mollifier radius {radius:g} too large for grid {domain.shape}"
        )
    offsets = np.stack(
        np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij"), axis=-1
    ).astype(float)
    if domain.is_periodic:
        assert domain.lattice is not None
        physical = (offsets * domain.spacing) @ domain.lattice.matrix
    else:
        physical = offsets * domain.spacing
    z2 = np.sum(physical**2, axis=-1) / radius**2
    with np.errstate(divide="ignore", over="ignore"):
        weights = np.where(z2 < 1.0, np.exp(-1.0 / (1.0 - np.minimum(z2, 1.0 - 1e-300))), 0.0)
    total = float(np.sum(weights))
    if total <= 0.0:
        # radius below the grid spacing: identity kernel
        weights = np.zeros_like(z2)
        weights[tuple(reach)] = 1.0
        total = 1.0
    return weights / total


def mollify(
    u0: Union[GridFunction, FieldFn], radius: float, domain: Optional[DomainSpec] = None
) -> GridFunction:
    """Discrete convolution with the normalised bump kernel of the given radius."""
    if callable(u0) and not isinstance(u0, GridFunction):
        if domain is None:
            raise ConfigurationError("closed-form fields need a domain to sample on")
        u0 = sample_field(domain, u0)
    domain = u0.domain
    kernel = bump_kernel(domain, radius)
    if domain.is_periodic:
        mode = "wrap"
    elif domain.kind is DomainKind.RECTANGLE and domain.boundary is BoundaryCondition.NEUMANN:
        mode = "mirror"
    elif domain.kind is DomainKind.DISK and domain.boundary is BoundaryCondition.NEUMANN:
        mode = "nearest"
    else:
        mode = "constant"
    smoothed = correlate(u0.values, kernel, mode=mode, cval=0.0)
    smoothed = np.where(domain.sample_mask(), smoothed, 0.0)
    logger.debug(f"mollified on {domain.describe()} with radius {radius:g}")
    return GridFunction(domain, apply_boundary_condition(smoothed, domain), u0.time)


def mollification_deviation(u0: GridFunction, smoothed: GridFunction) -> float:
    """sup |u0,n - u0| over the samples."""
    return float(np.max(np.abs(smoothed.sample_values() - u0.sample_values())))
