"""Doubled-variable scans, empirical moduli, gradient-bound curves and boundary estimates."""

import itertools
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from ..config.logging_config import get_logger
from ..config.settings import Settings, get_settings
from ..core.exceptions import ConfigurationError, MissingConstantError
from ..models.anisotropy import AnisotropyModel
from ..models.barrier import (
    BarrierProfile,
    ModulusProfile,
    PLaplacianBarrier,
    RadialProfile,
    TabulatedProfile,
)
from ..models.coefficients import PLaplacianModel
from ..models.grid import BoundaryCondition, DomainSpec, GridFunction
from ..models.report import ModulusTable, PairScanResult, ReportEntry, VerificationReport
from ..models.run import EvolutionRun
from .anisotropy_service import (
    distance_field,
    duality_round_trip,
    lemma_sampling,
    sphere_constants,
    verify_homogeneity,
)
from .barrier_service import fp_limit, residual_table, rp_constant
from .evolution_service import run_to, sine_wave
from .grid_service import minimal_image_batch, oscillation

logger = get_logger(__name__)

CHUNK_PAIRS = 1_000_000
MODULUS_BINS = 128
BOUND_CURVES = ("mcf", "anisotropic_periodic", "ellipticity", "plaplacian", "anisotropic_dirichlet")


def tolerance_for(domain: DomainSpec, settings: Optional[Settings] = None) -> float:
    """tolerance_scale * (C_disc h^2 + 1e-8) for modulus and boundary checks."""
    settings = settings or get_settings()
    return settings.tolerance_scale * (settings.disc_tolerance_constant * domain.h_max**2 + 1e-8)


# Pair scans


def _sample_points(domain: DomainSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid indices, coordinates and a position lookup of the samples entering pair scans."""
    mask = domain.sample_mask()
    indices = np.argwhere(mask)
    coords = domain.coordinates()[mask]
    lookup = np.full(domain.shape, -1, dtype=np.int64)
    lookup[mask] = np.arange(len(indices))
    return indices, coords, lookup


def _near_offsets(domain: DomainSpec, band: int) -> List[np.ndarray]:
    """Lexicographically positive index offsets within band * h of the origin."""
    offsets = []
    for k in itertools.product(range(-band, band + 1), repeat=domain.dimension):
        nonzero = [c for c in k if c != 0]
        if not nonzero or nonzero[0] < 0:
            continue
        step = np.array(k, dtype=float)
        if domain.is_periodic:
            assert domain.lattice is not None
            length = float(np.linalg.norm((step * domain.spacing) @ domain.lattice.matrix))
        else:
            length = float(np.linalg.norm(step * domain.spacing))
        if length <= band * domain.h_max * (1.0 + 1e-12):
            offsets.append(np.array(k))
    return offsets


def _near_pairs(domain: DomainSpec, band: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    indices, _, lookup = _sample_points(domain)
    shape = np.array(domain.shape)
    for offset in _near_offsets(domain, band):
        target = indices + offset
        if domain.is_periodic:
            target = np.mod(target, shape)
            valid = np.ones(len(indices), dtype=bool)
        else:
            valid = np.all((target >= 0) & (target < shape), axis=1)
        first = np.flatnonzero(valid)
        second = lookup[tuple(target[valid].T)]
        keep = second >= 0
        yield first[keep], second[keep]


def pair_chunks(
    domain: DomainSpec, settings: Optional[Settings] = None, seed: int = 0
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Deterministic pair index chunks (positions into the sample list).

    Exhaustive when the sample count is at most ``exhaustive_pair_limit``; otherwise all pairs
    within ``near_diagonal_band`` cells plus ``pair_budget`` scrambled-Halton pairs.
    """
    settings = settings or get_settings()
    m = int(np.count_nonzero(domain.sample_mask()))
    if m <= settings.exhaustive_pair_limit:
        rows = max(1, CHUNK_PAIRS // max(m, 1))
        columns = np.arange(m)
        for start in range(0, m, rows):
            first = np.arange(start, min(start + rows, m))
            grid_a, grid_b = np.meshgrid(first, columns, indexing="ij")
            upper = grid_b > grid_a
            yield grid_a[upper], grid_b[upper]
        return

    yield from _near_pairs(domain, settings.near_diagonal_band)
    engine = qmc.Halton(d=2, scramble=True, seed=seed)
    remaining = settings.pair_budget
    while remaining > 0:
        count = min(CHUNK_PAIRS, remaining)
        points = np.minimum((engine.random(count) * m).astype(np.int64), m - 1)
        distinct = points[:, 0] != points[:, 1]
        yield points[distinct, 0], points[distinct, 1]
        remaining -= count


def pair_distances(
    domain: DomainSpec, coords: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    displacement = coords[b] - coords[a]
    if domain.is_periodic:
        assert domain.lattice is not None
        displacement = minimal_image_batch(displacement, domain.lattice)
    return np.linalg.norm(displacement, axis=-1)


def z_check(
    u: GridFunction,
    profile: BarrierProfile,
    eps: float = 0.0,
    settings: Optional[Settings] = None,
    seed: int = 0,
) -> PairScanResult:
    """max over sampled pairs of |u(y) - u(x)| - 2 phi(|y - x| / 2, t) - eps (1 + t).

    Raises:
        ProfileRangeError: the profile does not reach half the largest pair distance
    """
    if eps < 0.0:
        raise ConfigurationError("slack eps must be non-negative")
    domain = u.domain
    t = u.time
    profile.check_range(0.5 * domain.max_pair_distance(), t)
    _, coords, _ = _sample_points(domain)
    values = u.sample_values()

    best, best_pair, scanned = -np.inf, None, 0
    for a, b in pair_chunks(domain, settings, seed):
        if len(a) == 0:
            continue
        distance = pair_distances(domain, coords, a, b)
        margin = np.abs(values[b] - values[a]) - 2.0 * profile.value(0.5 * distance, t)
        k = int(np.argmax(margin))
        scanned += len(a)
        if margin[k] > best:
            best, best_pair = float(margin[k]), (int(a[k]), int(b[k]))
    best -= eps * (1.0 + t)
    if best_pair is None:
        return PairScanResult(best, None, None, scanned)
    x, y = coords[best_pair[0]].tolist(), coords[best_pair[1]].tolist()
    return PairScanResult(best, x, y, scanned)


def _concave_majorant(s: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least concave nondecreasing majorant through (0, 0): pool adjacent slope violators."""
    order = np.lexsort((-v, s))
    hull: List[Tuple[float, float]] = [(0.0, 0.0)]
    for si, vi in zip(s[order], v[order]):
        if si <= hull[-1][0]:
            # equal abscissae arrive highest first
            continue
        hull.append((float(si), float(vi)))
        while len(hull) >= 3:
            (s0, v0), (s1, v1), (s2, v2) = hull[-3:]
            if (v1 - v0) * (s2 - s1) <= (v2 - v1) * (s1 - s0):
                # middle point lies on or below the chord
                del hull[-2]
            else:
                break
    points = np.array(hull)
    top = int(np.argmax(points[:, 1]))
    return points[: top + 1, 0], points[: top + 1, 1]


def empirical_modulus(
    u: GridFunction,
    bins: int = MODULUS_BINS,
    settings: Optional[Settings] = None,
    seed: int = 0,
) -> ModulusTable:
    """Binned max |u(y) - u(x)| / 2 over s = |y - x| / 2 and its concave majorant.

    Each bin contributes (smallest s in the bin, largest half-difference in the bin), so the
    majorant bounds every scanned pair.
    """
    domain = u.domain
    s_max = 0.5 * domain.max_pair_distance()
    _, coords, _ = _sample_points(domain)
    values = u.sample_values()
    low = np.full(bins, np.inf)
    high = np.full(bins, -np.inf)
    for a, b in pair_chunks(domain, settings, seed):
        if len(a) == 0:
            continue
        s = 0.5 * pair_distances(domain, coords, a, b)
        half = 0.5 * np.abs(values[b] - values[a])
        index = np.clip((s / s_max * bins).astype(int), 0, bins - 1)
        np.minimum.at(low, index, s)
        np.maximum.at(high, index, half)

    filled = np.isfinite(low)
    hull_s, hull_psi = _concave_majorant(low[filled], high[filled])
    if hull_s[-1] < s_max:
        hull_s = np.append(hull_s, s_max)
        hull_psi = np.append(hull_psi, hull_psi[-1])
    return ModulusTable(hull_s, hull_psi, low[filled], high[filled])


def modulus_profile_from(table: ModulusTable) -> ModulusProfile:
    return ModulusProfile(table.s, table.psi)


# Gradient bounds


def _require(params: Dict[str, Any], names: Sequence[str], curve: str) -> List[float]:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise MissingConstantError(f"bound curve '{curve}' needs {', '.join(missing)}")
    return [float(params[n]) for n in names]


def gradient_bound(
    curve: str, t: float, m: float, params: Optional[Dict[str, Any]] = None
) -> float:
    """Evaluate a named gradient-bound curve at time t > 0 for oscillation M.

    Curves: ``mcf`` sqrt(exp(2M^2/t) - 1); ``anisotropic_periodic`` sqrt(exp(2M^2/(A t)) - 1);
    ``ellipticity`` P exp(1 + M^2/(A0 t)); ``plaplacian`` M^{2/p} t^{-1/p} / (2 R_p F_p(inf));
    ``anisotropic_dirichlet`` sqrt(C exp(M^2/(A t)) - 1).
    """
    params = params or {}
    if t <= 0.0:
        raise ConfigurationError("gradient bounds are evaluated at t > 0")
    with np.errstate(over="ignore"):
        if curve == "mcf":
            return float(np.sqrt(np.expm1(2.0 * m * m / t)))
        if curve == "anisotropic_periodic":
            (a,) = _require(params, ["A"], curve)
            return float(np.sqrt(np.expm1(2.0 * m * m / (a * t))))
        if curve == "ellipticity":
            p_threshold, a0 = _require(params, ["P", "A0"], curve)
            return float(p_threshold * np.exp(1.0 + m * m / (a0 * t)))
        if curve == "plaplacian":
            (p,) = _require(params, ["p"], curve)
            return float(m ** (2.0 / p) * t ** (-1.0 / p) / (2.0 * rp_constant(p) * fp_limit(p)))
        if curve == "anisotropic_dirichlet":
            a, c = _require(params, ["A", "C"], curve)
            return float(np.sqrt(max(c * np.exp(m * m / (a * t)) - 1.0, 0.0)))
    raise ConfigurationError(f"unknown bound curve '{curve}'; expected one of {BOUND_CURVES}")


def gradient_bound_check(
    run: EvolutionRun,
    curve: str,
    params: Optional[Dict[str, Any]] = None,
    settings: Optional[Settings] = None,
    scale: float = 1.0,
) -> VerificationReport:
    """Compare max |Du| at each checkpoint with a bound curve; tolerance is the relative slack.

    ``scale`` multiplies the measured gradients (planted violations for negative controls).
    """
    settings = settings or get_settings()
    params = dict(params or {})
    assert run.initial is not None
    m = float(params["M"]) if params.get("M") is not None else oscillation(run.initial)
    t_min = float(params.get("t_min", 0.0))
    slack = float(params.get("slack", settings.gradient_slack))
    report = VerificationReport(
        name=f"gradient_bound:{curve}",
        provenance=_provenance(run),
        params={**params, "M": m, "slack": slack, "scale": scale},
    )
    for diagnostics in run.diagnostics:
        t = diagnostics.time
        if t <= 0.0 or t < t_min:
            continue
        bound = gradient_bound(curve, t, m, params)
        measured = diagnostics.max_gradient * scale
        finite = np.isfinite(bound)
        report.add(
            ReportEntry(
                margin=measured - bound if finite else -np.inf,
                tolerance=slack * bound if finite else 0.0,
                time=t,
                details={
                    "max_gradient": measured,
                    "bound": bound,
                    "relative_margin": (measured - bound) / bound if finite and bound > 0 else None,
                    "sharpness": measured / bound if finite and bound > 0 else None,
                },
            )
        )
    _log_outcome(report)
    return report


def sharpness_summary(report: VerificationReport) -> Dict[str, Any]:
    ratios = [e.details.get("sharpness") for e in report.entries]
    ratios = [r for r in ratios if r is not None]
    return {"best": max(ratios) if ratios else None, "worst": min(ratios) if ratios else None}


# Modulus and boundary checks


def _provenance(run: EvolutionRun, profile: Optional[BarrierProfile] = None) -> Dict[str, Any]:
    block: Dict[str, Any] = {
        "run": run.label,
        "model": run.model.describe(),
        "domain": run.domain.describe(),
    }
    if profile is not None:
        block["barrier"] = profile.label
    return block


def _log_outcome(report: VerificationReport) -> None:
    worst = report.worst
    status = "PASS" if report.passed else "FAIL"
    if worst is None:
        logger.info(f"{report.name}: no entries")
    else:
        logger.info(
            f"{report.name}: {status}, worst margin {worst.margin:.6g} (tol {worst.tolerance:.3g})"
        )


def modulus_check(
    run: EvolutionRun,
    profile: BarrierProfile,
    eps: float = 0.0,
    settings: Optional[Settings] = None,
    seed: int = 0,
    scale: float = 1.0,
) -> VerificationReport:
    """z_check of every checkpoint with t > 0 against the barrier."""
    settings = settings or get_settings()
    tolerance = tolerance_for(run.domain, settings)
    report = VerificationReport(
        name="modulus",
        provenance=_provenance(run, profile),
        params={"eps": eps, "scale": scale},
    )
    for snapshot in run.snapshots:
        if snapshot.time <= 0.0:
            continue
        result = z_check(snapshot.scaled(scale), profile, eps, settings, seed)
        report.add(
            ReportEntry(
                margin=result.margin,
                tolerance=tolerance,
                time=snapshot.time,
                location=result.location(),
                details={"pairs": result.pairs},
            )
        )
    _log_outcome(report)
    return report


def boundary_estimate_check(
    run: EvolutionRun,
    profile: BarrierProfile,
    anisotropy: Optional[AnisotropyModel] = None,
    settings: Optional[Settings] = None,
    scale: float = 1.0,
) -> VerificationReport:
    """max over interior samples of |u(x, t)| - psi(d(x), t); cut-locus samples are skipped."""
    domain = run.domain
    if domain.boundary is not BoundaryCondition.DIRICHLET:
        raise ConfigurationError("boundary estimate check requires a Dirichlet domain")
    settings = settings or get_settings()
    tolerance = tolerance_for(domain, settings)
    interior = domain.interior_mask()
    points = domain.coordinates()[interior]
    distance, _, cut = distance_field(anisotropy, domain, points)
    profile.check_range(float(np.max(distance)))
    used = ~cut

    report = VerificationReport(
        name="boundary_estimate",
        provenance=_provenance(run, profile),
        params={"anisotropic": anisotropy is not None, "scale": scale},
    )
    for snapshot in run.snapshots:
        if snapshot.time <= 0.0:
            continue
        magnitude = np.abs(snapshot.values[interior]) * scale
        excess = magnitude[used] - profile.value(distance[used], snapshot.time)
        k = int(np.argmax(excess))
        report.add(
            ReportEntry(
                margin=float(excess[k]),
                tolerance=tolerance,
                time=snapshot.time,
                location=points[used][k].tolist(),
                details={"skipped_cut_locus": int(np.count_nonzero(cut))},
            )
        )
    _log_outcome(report)
    return report


# Profile and anisotropy diagnostics


def barrier_residual_check(profile: BarrierProfile) -> VerificationReport:
    """Supersolution residual phi_t - alpha(phi') phi'' - B >= -1e-6 on the profile's grid."""
    report = VerificationReport(name="barrier_residual", provenance={"barrier": profile.label})
    if isinstance(profile, TabulatedProfile):
        residual = profile.discrete_residual()
        report.add(ReportEntry(float(-np.min(residual)), 1e-6, label="discrete_residual"))
        for name, holds in sorted(profile.shape_checks.items()):
            report.add(ReportEntry(0.0 if holds else 1.0, 0.0, label=name))
    elif isinstance(profile, RadialProfile):
        z = profile.nodes[profile.nodes >= 1e-3]
        report.add(
            ReportEntry(float(np.max(np.abs(profile.ode_residual(z)))), 1e-8, label="ode_residual")
        )
        slope_end = float(profile.derivative(np.array(profile.z_max)))
        report.add(ReportEntry(abs(slope_end - 1.0), 1e-6, label="slope_at_z_max"))
        slopes = profile.derivative(profile.nodes)
        overshoot = max(float(np.max(slopes)) - 1.0 - 1e-6, -float(np.min(slopes)))
        report.add(ReportEntry(overshoot, 0.0, label="slope_range"))
    else:
        rows = residual_table(profile)
        report.add(ReportEntry(float(-np.nanmin(rows[:, 5])), 1e-6, label="residual"))
        if isinstance(profile, PLaplacianBarrier):
            report.params["p"] = profile.p
    _log_outcome(report)
    return report


def aniso_diagnostics(
    model: AnisotropyModel, seed: int = 0, samples: int = 10_000
) -> VerificationReport:
    """Homogeneity residuals, sphere constants, sampled coefficient bounds and duality."""
    report = VerificationReport(
        name="aniso_diagnostics", provenance={"anisotropy": model.to_dict()}
    )
    for name, residual in sorted(verify_homogeneity(model, seed=seed).items()):
        report.add(ReportEntry(residual, 1e-6, label=f"homogeneity:{name}"))

    constants = sphere_constants(model)
    report.params["constants"] = constants.to_dict()
    sampled = lemma_sampling(model, constants, samples, seed)
    report.add(
        ReportEntry(
            1.0 - sampled["ratio_min"], 1e-4, label="coefficient_lower_bound", details=sampled
        )
    )
    report.add(ReportEntry(duality_round_trip(model, seed=seed), 1e-8, label="duality_round_trip"))
    _log_outcome(report)
    return report


def calibrate_disc_constant(resolutions: Sequence[int] = (32, 64), t_end: float = 0.05) -> float:
    """C_disc = max error / h^2 of the periodic 1D heat run against exp(-4 pi^2 t) sin(2 pi x)."""
    constant = 0.0
    for n in resolutions:
        domain = DomainSpec.unit_periodic(1, n)
        run = EvolutionRun(
            PLaplacianModel(1, 2.0), domain, sine_wave(domain), label=f"calibration N={n}"
        )
        run_to(run, t_end)
        x = domain.coordinates()[..., 0]
        exact = np.exp(-4.0 * np.pi**2 * t_end) * np.sin(2.0 * np.pi * x)
        error = float(np.max(np.abs(run.state.values - exact)))
        constant = max(constant, error / domain.h_max**2)
    logger.info(f"calibrated C_disc = {constant:.6g}")
    return constant
