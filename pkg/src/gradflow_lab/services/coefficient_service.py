"""Coefficient evaluation, degeneracy scalar alpha(R, t) and ellipticity diagnostics."""

from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize, minimize_scalar

from ..config.logging_config import get_logger
from ..core.exceptions import (
    ConfigurationError,
    DegenerateCoefficientError,
    UnboundedDegeneracyError,
)
from ..models.coefficients import CoefficientModel, DegeneracyProfile
from ..utils.helpers import sphere_samples, tangent_basis

logger = get_logger(__name__)

THETA_POINTS = 256
DIRECTION_SAMPLES = {1: 2, 2: 64, 3: 256}
SATURATION_FRACTION = 0.99


def coefficients(model: CoefficientModel, p: Any, t: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate (A(p, t), b(p, t)) for one gradient or a batch of gradients.

    Args:
        model: Coefficient model
        p: Gradient(s) of shape ``(..., n)``
        t: Time

    Returns:
        Tuple of the symmetric matrix ``(..., n, n)`` and the drift ``(...)``
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ConfigurationError("gradient must be finite")
    if p.shape[-1] != model.dimension:
        raise ConfigurationError(
            f"gradient of length {p.shape[-1]} for a model in dimension {model.dimension}"
        )
    return model.matrix(p, t), model.drift(p, t)


def _quotients(
    a_pp: np.ndarray, a_pw: np.ndarray, a_ww: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """v^T A v / cos^2(theta) for v = cos(theta) p^ + sin(theta) w."""
    tan = np.tan(theta)
    return a_pp[..., None] + 2.0 * tan * a_pw[..., None] + tan * tan * a_ww[..., None]


def _frames(matrices: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Tangent frame per direction plus the direction minimising the Schur quotient."""
    frames = []
    for a, d in zip(matrices, directions):
        basis = tangent_basis(d)
        a_tt = basis @ a @ basis.T
        a_tp = basis @ a @ d
        try:
            optimal = basis.T @ np.linalg.solve(a_tt, a_tp)
        except np.linalg.LinAlgError:
            optimal = basis[0]
        norm = np.linalg.norm(optimal)
        extra = optimal / norm if norm > 1e-14 else basis[0]
        frames.append(np.vstack([basis, extra]))
    return np.array(frames)


def _direction_minimum(
    model: CoefficientModel, direction: np.ndarray, radius: float, t: float
) -> float:
    """Exact minimum of the quotient over v for one gradient direction (Schur complement)."""
    d = direction / np.linalg.norm(direction)
    a = model.matrix(radius * d, t)
    if model.dimension == 1:
        return float(a[0, 0])
    basis = tangent_basis(d)
    a_tt = basis @ a @ basis.T
    a_tp = basis @ a @ d
    a_pp = float(d @ a @ d)
    try:
        return a_pp - float(a_tp @ np.linalg.solve(a_tt, a_tp))
    except np.linalg.LinAlgError:
        return a_pp


def _sampled_alpha(model: CoefficientModel, radius: float, t: float) -> float:
    n = model.dimension
    directions = sphere_samples(n, DIRECTION_SAMPLES.get(n, 256))
    matrices = model.matrix(radius * directions, t)
    a_pp = np.einsum("mi,mij,mj->m", directions, matrices, directions)
    if n == 1:
        return float(np.min(a_pp))

    frames = _frames(matrices, directions)
    a_pw = np.einsum("mkj,mij,mi->mk", frames, matrices, directions)
    a_ww = np.einsum("mki,mij,mkj->mk", frames, matrices, frames)
    theta = -0.5 * np.pi + np.pi * (np.arange(THETA_POINTS) + 0.5) / THETA_POINTS
    values = _quotients(a_pp[:, None], a_pw, a_ww, theta)

    m, k, j = np.unravel_index(np.argmin(values), values.shape)
    best = float(values[m, k, j])
    lo = theta[max(j - 1, 0)]
    hi = theta[min(j + 1, THETA_POINTS - 1)]

    def along_theta(th: float) -> float:
        row = _quotients(a_pp[m : m + 1], a_pw[m : m + 1, k], a_ww[m : m + 1, k], np.array([th]))
        return float(row[0, 0])

    if lo < theta[j] < hi:
        try:
            refined = minimize_scalar(along_theta, bracket=(lo, theta[j], hi), method="golden")
            best = min(best, float(refined.fun))
        except ValueError:
            # flat quotient: the grid value is already the minimum
            pass

    # refine the worst sampled gradient direction
    start = directions[m]
    basis = tangent_basis(start)
    result = minimize(
        lambda c: _direction_minimum(model, start + basis.T @ c, radius, t),
        np.zeros(n - 1),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400},
    )
    return min(best, float(result.fun))


def degeneracy_alpha(model: CoefficientModel, radius: float, t: float = 0.0) -> float:
    """Degeneracy scalar alpha(R, t).

    R^2 times the infimum over |p| = R and v with v.p != 0 of v^T A(p, t) v / (v.p)^2. Closed
    forms are used for the mean curvature, p-Laplacian and isotropic models.

    Args:
        model: Coefficient model
        radius: Gradient magnitude R >= 0
        t: Time

    Returns:
        alpha(R, t) > 0
    """
    if not np.isfinite(radius) or radius < 0.0:
        raise ConfigurationError(f"radius must be finite and non-negative, got {radius}")
    closed = model.closed_form_alpha(np.asarray(float(radius)), t)
    value = float(closed) if closed is not None else _sampled_alpha(model, float(radius), t)
    if not np.isfinite(value) or value <= 1e-14:
        logger.warning(f"{model.kind}: alpha({radius:g}) = {value:.3e} is not positive")
        raise DegenerateCoefficientError(
            f"degenerate-along-gradient: {model.kind} has alpha({radius:g}, {t:g}) = {value:.3e}"
        )
    return value


def _scan_radii(r_min: float, r_max: float) -> np.ndarray:
    start = int(np.floor(40.0 * np.log10(r_min) + 1e-9))
    stop = int(np.floor(40.0 * np.log10(r_max) + 1e-9))
    radii = 10.0 ** (np.arange(start, stop + 1) / 40.0)
    radii = radii[radii >= r_min * (1.0 - 1e-12)]
    if radii[-1] < r_max * (1.0 - 1e-12):
        radii = np.append(radii, r_max)
    return radii


def ellipticity_constants(
    model: CoefficientModel, r_max: float, t: float = 0.0
) -> Tuple[float, float]:
    """Certify (A0, P) with alpha(R, t) R^2 >= A0 for sampled R in [P, r_max].

    The scan grid is R_k = 10^(k/40) on [1, r_max]. A saturating floor takes the smallest P past
    which alpha R^2 stays within 1% of its maximum; a growing floor takes P = 1.

    Raises:
        UnboundedDegeneracyError: alpha R^2 decays along the scan or is not positive
    """
    if not r_max > 1.0:
        raise ConfigurationError("ellipticity scan needs r_max > 1")
    radii = _scan_radii(1.0, r_max)
    try:
        scaled = np.array([degeneracy_alpha(model, r, t) * r * r for r in radii])
    except DegenerateCoefficientError as e:
        raise UnboundedDegeneracyError(f"profile not computable: {e}") from e

    middle = float(np.interp(0.5 * np.log10(r_max), np.log10(radii), scaled))
    end = float(scaled[-1])
    if end < 0.5 * middle:
        logger.info(f"{model.kind}: alpha R^2 decays from {middle:.3g} to {end:.3g}")
        raise UnboundedDegeneracyError(
            f"{model.kind}: alpha(R) R^2 decays on [1, {r_max:g}]; no positive floor"
        )

    if end <= 2.0 * middle:
        tail_minima = np.minimum.accumulate(scaled[::-1])[::-1]
        target = SATURATION_FRACTION * float(np.max(scaled))
        k = int(np.argmax(tail_minima >= target))
        a0, threshold = float(tail_minima[k]), float(radii[k])
    else:
        a0, threshold = float(np.min(scaled)), 1.0

    logger.debug(f"{model.kind}: ellipticity constants A0={a0:.6g}, P={threshold:.6g}")
    return a0, threshold


def degeneracy_profile(model: CoefficientModel, r_max: float, t: float = 0.0) -> DegeneracyProfile:
    """Tabulate alpha(R, t) on a log grid from 1e-2 to r_max, with (A0, P) when certifiable."""
    radii = _scan_radii(1e-2, r_max)
    alpha = np.array([degeneracy_alpha(model, r, t) for r in radii])
    a0: Optional[float] = None
    threshold: Optional[float] = None
    try:
        a0, threshold = ellipticity_constants(model, r_max, t)
    except UnboundedDegeneracyError as e:
        logger.info(f"{model.kind}: no ellipticity constants ({e})")
    return DegeneracyProfile(radii, alpha, t, a0, threshold)


def divergence_criterion(
    model: CoefficientModel, r_max: float = 1e4, t: float = 0.0
) -> Dict[str, Any]:
    """Partial integrals of s alpha(s) on decades of [1, r_max] and a divergence verdict.

    Gradient bounds for arbitrary bounded data require the integral to diverge; a decade
    increment that does not shrink below half of the previous one is read as divergence.
    """
    radii = _scan_radii(1.0, r_max)
    integrand = np.array([s * degeneracy_alpha(model, s, t) for s in radii])
    partial = cumulative_trapezoid(integrand, radii, initial=0.0)

    decades = np.unique(np.clip(np.arange(0, int(np.floor(np.log10(r_max))) + 1), 0, None))
    marks = [float(np.interp(10.0**d, radii, partial)) for d in decades]
    increments = np.diff(marks)
    divergent = bool(len(increments) >= 2 and increments[-1] >= 0.5 * increments[-2])
    return {
        "model": model.kind,
        "decades": [float(10.0**d) for d in decades],
        "partial_integrals": marks,
        "divergent": divergent,
    }


def barrier_existence(
    model: CoefficientModel, holder_exponent: Optional[float] = None, t: float = 0.0
) -> Dict[str, Any]:
    """Decay exponent gamma of the smallest eigenvalue, lambda_min(p) ~ |p|^-gamma.

    Barriers for merely bounded data exist when gamma <= 2; for Holder data with exponent beta
    they exist when gamma < 2 / (1 - beta).
    """
    radii = np.geomspace(10.0, 1e4, 13)
    directions = sphere_samples(model.dimension, DIRECTION_SAMPLES.get(model.dimension, 256))
    smallest = []
    for r in radii:
        eigenvalues = np.linalg.eigvalsh(model.matrix(r * directions, t))[..., 0]
        smallest.append(float(np.min(eigenvalues)))
    smallest_arr = np.array(smallest)
    if np.any(smallest_arr <= 0.0):
        raise DegenerateCoefficientError(
            f"{model.kind}: coefficient matrix loses ellipticity at large |p|"
        )

    slope = float(np.polyfit(np.log(radii[-7:]), np.log(smallest_arr[-7:]), 1)[0])
    gamma = max(0.0, -slope)
    report: Dict[str, Any] = {
        "model": model.kind,
        "decay_exponent": gamma,
        "bounded_data": bool(gamma <= 2.0 + 1e-3),
    }
    if holder_exponent is not None:
        if not 0.0 < holder_exponent < 1.0:
            raise ConfigurationError("Holder exponent must lie in (0, 1)")
        report["holder_exponent"] = holder_exponent
        report["holder_data"] = bool(gamma < 2.0 / (1.0 - holder_exponent))
    return report
