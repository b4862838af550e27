"""Construction of one-dimensional barrier profiles and the barriers built from them."""

from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import bisect
from scipy.special import beta as beta_fn
from scipy.special import betainc, erfc, gamma

from ..config.logging_config import get_logger
from ..core.exceptions import (
    ConfigurationError,
    ConvergenceError,
    DegenerateODEError,
    NumericalError,
)
from ..models.anisotropy import SphereConstants
from ..models.barrier import (
    AlphaFn,
    BarrierProfile,
    DoubledProfile,
    ModulusProfile,
    PLaplacianBarrier,
    ProfileKind,
    RadialBarrier,
    RadialProfile,
    TabulatedProfile,
    TranslatorProfile,
    fp_integrand,
)
from ..models.coefficients import AnisotropicModel, CoefficientModel, MCFModel, PLaplacianModel

logger = get_logger(__name__)

PathLike = Union[str, Path]

START_TIME = 1e-4
FIRST_STEP = 1e-5
STEP_GROWTH = 1.1
PROFILE_NODES = 2048
TAIL_CUTOFF = 40.0
RADIAL_Z_MAX = 20.0
RADIAL_START = 1e-6
RADIAL_NODES = 20001
FREE_BOUNDARY_BAND = 1e-3


def _check_exponent(p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise ConfigurationError(f"exponent p must exceed 1, got {p}")
    return p


def fp_value(p: float, xi: float) -> float:
    """F_p(xi) by adaptive quadrature of the case-appropriate integrand."""
    p = _check_exponent(p)
    if xi < 0.0:
        raise ConfigurationError(f"F_p needs xi >= 0, got {xi}")
    upper = min(xi, 1.0) if p > 2.0 else xi
    if upper == 0.0:
        return 0.0
    value, _ = quad(
        lambda s: float(fp_integrand(p, s)), 0.0, upper, epsabs=1e-13, epsrel=1e-13, limit=200
    )
    return float(value)


def fp_limit(p: float) -> float:
    """F_p(inf): compact support for p > 2, otherwise a cutoff plus the exact tail."""
    p = _check_exponent(p)
    if p > 2.0:
        return fp_value(p, 1.0)
    head = fp_value(p, TAIL_CUTOFF)
    if p == 2.0:
        tail = 0.5 * np.sqrt(np.pi) * erfc(TAIL_CUTOFF)
    else:
        b = 1.0 / (2.0 - p)
        x = 1.0 / (1.0 + TAIL_CUTOFF**2)
        tail = 0.5 * beta_fn(0.5, b - 0.5) * betainc(b - 0.5, 0.5, x)
    return float(head + tail)


def rp_constant(p: float) -> float:
    """Scaling constant R_p of the self-similar p-Laplacian profile.

    R_p diverges like (4 / |p - 2|)^{1/2} as p -> 2 while R_p F_p(inf) tends to sqrt(pi),
    which is R_2 F_2(inf).
    """
    p = _check_exponent(p)
    if p == 2.0:
        return 2.0
    f_inf = fp_limit(p)
    if p > 2.0:
        base = 2.0 * p * (p - 1.0) / (p - 2.0)
        return float(base ** (1.0 / p) * (2.0 * f_inf) ** (-(p - 2.0) / p))
    base = (2.0 - p) / (2.0 * p * (p - 1.0))
    return float(base ** (-1.0 / p) * (2.0 * f_inf) ** ((2.0 - p) / p))


def plap_barrier(p: float, amplitude: float, t_max: float = np.inf) -> PLaplacianBarrier:
    """Amplitude-M p-Laplacian barrier, residual-checked at construction."""
    p = _check_exponent(p)
    profile = PLaplacianBarrier(p, amplitude, rp_constant(p), fp_limit(p), t_max)
    rows = residual_table(profile)
    # residual relative to the size of phi_t ~ phi / t
    scale = max(1.0, float(np.max(np.abs(rows[:, 2] / rows[:, 1]))))
    worst = float(np.nanmax(np.abs(rows[:, 5])))
    if worst > 1e-6 * scale:
        logger.error(f"{profile.label}: construction residual {worst:.3e}")
        raise NumericalError(f"{profile.label}: residual {worst:.3e} exceeds 1e-6")
    logger.debug(f"{profile.label}: R_p={profile.rp:.8g}, F_p(inf)={profile.f_inf:.8g}")
    return profile


def rescale_profile(profile: BarrierProfile, amplitude: float) -> BarrierProfile:
    """Return M phi(z/M, t/M^2) for the families closed under amplitude scaling."""
    if isinstance(profile, PLaplacianBarrier):
        return PLaplacianBarrier(
            profile.p, profile.amplitude * amplitude, profile.rp, profile.f_inf, profile.t_max
        )
    if isinstance(profile, TabulatedProfile):
        return profile.scaled(profile.amplitude * amplitude)
    raise ConfigurationError(f"{profile.label} has no amplitude scaling law")


# Curvature-type profiles


def _newton_system(
    u: np.ndarray, previous: np.ndarray, dt: float, h: float, alpha: AlphaFn, forcing: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backward-Euler residual on the interior nodes and its tridiagonal Jacobian."""
    slope = (u[2:] - u[:-2]) / (2.0 * h)
    curvature = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    coefficient = alpha(np.abs(slope))
    delta = 1e-7 * (1.0 + np.abs(slope))
    d_alpha = (alpha(np.abs(slope + delta)) - alpha(np.abs(slope - delta))) / (2.0 * delta)

    residual = u[1:-1] - previous[1:-1] - dt * (coefficient * curvature + forcing)
    upper = -dt * (d_alpha * curvature / (2.0 * h) + coefficient / (h * h))
    lower = -dt * (-d_alpha * curvature / (2.0 * h) + coefficient / (h * h))
    diagonal = 1.0 + 2.0 * dt * coefficient / (h * h)
    return residual, lower, diagonal, upper


def _implicit_step(
    previous: np.ndarray,
    dt: float,
    h: float,
    alpha: AlphaFn,
    forcing: float,
    max_iterations: int = 50,
) -> np.ndarray:
    tolerance = 1e-13 * max(1.0, float(np.max(np.abs(previous))))
    u = previous.copy()
    residual, lower, diagonal, upper = _newton_system(u, previous, dt, h, alpha, forcing)
    norm = float(np.max(np.abs(residual)))
    for _ in range(max_iterations):
        if norm <= tolerance:
            return u
        banded = np.zeros((3, len(diagonal)))
        banded[0, 1:] = upper[:-1]
        banded[1] = diagonal
        banded[2, :-1] = lower[1:]
        delta = solve_banded((1, 1), banded, -residual)

        # damped Newton: halve the step until the residual decreases
        step = 1.0
        for _ in range(30):
            trial = u.copy()
            trial[1:-1] += step * delta
            trial_system = _newton_system(trial, previous, dt, h, alpha, forcing)
            trial_norm = float(np.max(np.abs(trial_system[0])))
            if trial_norm < norm or step * float(np.max(np.abs(delta))) <= tolerance:
                break
            step *= 0.5
        u = trial
        residual, lower, diagonal, upper = trial_system
        norm = trial_norm
    if norm <= 1e3 * tolerance:
        return u
    raise ConvergenceError(
        f"nonlinear solver non-convergence: residual {norm:.3e} after dt={dt:.3e}"
    )


def _shape_checks(profile_values: np.ndarray, times: np.ndarray, t_start: float) -> Dict[str, bool]:
    settled = profile_values[times >= 10.0 * t_start]
    if len(settled) == 0:
        return {"monotone": True, "concave": True}
    first = np.diff(settled, axis=1)
    second = np.diff(settled, n=2, axis=1)
    tolerance = 1e-9 + 1e-6 * float(np.max(np.abs(second)))
    return {
        "monotone": bool(np.all(first >= -1e-12)),
        "concave": bool(np.all(second <= tolerance)),
    }


def solve_curvature_equation(
    alpha: AlphaFn,
    length: float,
    top: float,
    slope: float,
    t_start: float,
    t_end: float,
    dt_first: float = FIRST_STEP,
    forcing: float = 0.0,
    nodes: int = PROFILE_NODES,
    label: str = "curvature",
) -> TabulatedProfile:
    """Solve phi_t = alpha(phi') phi'' + B on [0, length] with phi(0) = 0, phi(length) = top.

    Initial data min(top, slope z) at t_start; backward Euler with Newton on the tridiagonal
    system, dt growing geometrically from ``dt_first`` to (t_end - t_start) / 100.

    Returns:
        Unit-amplitude TabulatedProfile holding every time slice
    """
    if not (length > 0.0 and top > 0.0 and slope > 0.0 and t_end > t_start >= 0.0):
        raise ConfigurationError("curvature profile needs positive length, height and time span")
    z = np.linspace(0.0, length, nodes)
    h = float(z[1])
    values = np.minimum(top, slope * z)
    values[0], values[-1] = 0.0, top

    slices = [values.copy()]
    times = [t_start]
    t = t_start
    dt = dt_first
    dt_max = (t_end - t_start) / 100.0
    while t < t_end * (1.0 - 1e-14):
        step = min(dt, t_end - t)
        values = _implicit_step(values, step, h, alpha, forcing)
        t += step
        slices.append(values.copy())
        times.append(t)
        dt = min(dt * STEP_GROWTH, dt_max)

    table = np.array(slices)
    time_array = np.array(times)
    checks = _shape_checks(table, time_array, t_start)
    if not all(checks.values()):
        logger.warning(f"{label}: shape checks failed {checks}")
    logger.debug(f"{label}: {len(times)} slices on {nodes} nodes up to t={t_end:.6g}")
    return TabulatedProfile(
        z, time_array, table, alpha, label, forcing=forcing, shape_checks=checks
    )


def curvature_profile(
    alpha: AlphaFn,
    length: float,
    t_max: float,
    amplitude: float = 1.0,
    forcing: float = 0.0,
    label: Optional[str] = None,
    nodes: int = PROFILE_NODES,
) -> TabulatedProfile:
    """Profile rising from 0 to M/2 for phi_t = alpha(phi') phi'' + B, as M phi_1(z/M, t/M^2).

    The unit problem starts at t0 = 1e-4 from the smoothed step min(1/2, z/h0), h0 four grid
    spacings, so user time t corresponds to unit time t/M^2 + t0.
    """
    if not (length > 0.0 and t_max > 0.0 and amplitude > 0.0):
        raise ConfigurationError("curvature profile needs L, t_max and M positive")
    unit_length = length / amplitude
    h0 = 4.0 * unit_length / (nodes - 1)
    unit = solve_curvature_equation(
        alpha,
        unit_length,
        0.5,
        1.0 / h0,
        START_TIME,
        START_TIME + t_max / amplitude**2,
        forcing=forcing * amplitude,
        nodes=nodes,
        label=label or "curvature",
    )
    return unit.scaled(amplitude)


def csf_alpha(slope: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.asarray(slope, dtype=float) ** 2)


def csf_profile(length: float, t_max: float, amplitude: float = 1.0) -> TabulatedProfile:
    """Curve-shortening profile phi_t = phi'' / (1 + phi'^2), phi(0) = 0, phi(L) = M/2."""
    return curvature_profile(csf_alpha, length, t_max, amplitude, label="csf")


def anisotropic_alpha(a: float, s_min: float) -> AlphaFn:
    """alpha(s) = A s_min^2 / (1 + s_min^2 s^2) of the anisotropic boundary barrier."""

    def alpha(slope: np.ndarray) -> np.ndarray:
        s = np.asarray(slope, dtype=float)
        return a * s_min**2 / (1.0 + s_min**2 * s * s)

    return alpha


def translator_profile(
    alpha: AlphaFn,
    speed: float,
    forcing: float = 0.0,
    z_max: float = 1.0,
    initial_slope: float = 0.0,
    steps: int = 8192,
) -> TranslatorProfile:
    """Translating solution g(z) + c t with g(0) = 0, g'(0) = g0', g'' = (c - B) / alpha(g').

    Integrated with classical RK4 on a uniform grid.

    Raises:
        DegenerateODEError: alpha(g') vanishes or g' blows up; ``partial`` holds the profile
            computed up to the failure when at least two nodes were reached
    """
    if not speed > 0.0 or forcing < 0.0 or not z_max > 0.0 or initial_slope < 0.0:
        raise ConfigurationError("translator needs c > 0, B >= 0, z_max > 0 and g0' >= 0")
    h = z_max / steps
    z = np.linspace(0.0, z_max, steps + 1)
    g = np.zeros(steps + 1)
    dg = np.zeros(steps + 1)
    dg[0] = initial_slope
    gap = speed - forcing

    def rhs(slope: float) -> float:
        coefficient = float(alpha(np.array(abs(slope))))
        if not np.isfinite(coefficient) or coefficient <= 1e-300:
            raise FloatingPointError(f"alpha({slope:.6g}) = {coefficient:.3e}")
        return gap / coefficient

    for k in range(steps):
        try:
            k1g, k1d = dg[k], rhs(dg[k])
            k2g, k2d = dg[k] + 0.5 * h * k1d, rhs(dg[k] + 0.5 * h * k1d)
            k3g, k3d = dg[k] + 0.5 * h * k2d, rhs(dg[k] + 0.5 * h * k2d)
            k4g, k4d = dg[k] + h * k3d, rhs(dg[k] + h * k3d)
        except FloatingPointError as e:
            raise _degenerate(z, g, dg, k, speed, alpha, forcing, str(e)) from e
        g[k + 1] = g[k] + h * (k1g + 2.0 * k2g + 2.0 * k3g + k4g) / 6.0
        dg[k + 1] = dg[k] + h * (k1d + 2.0 * k2d + 2.0 * k3d + k4d) / 6.0
        if not (np.isfinite(dg[k + 1]) and abs(dg[k + 1]) < 1e12):
            raise _degenerate(z, g, dg, k, speed, alpha, forcing, f"g' = {dg[k + 1]:.3e}")
    return TranslatorProfile(z, g, dg, speed, alpha, forcing, label=f"translator(c={speed:g})")


def _degenerate(z, g, dg, k, speed, alpha, forcing, reason: str) -> DegenerateODEError:
    logger.warning(f"translator(c={speed:g}): degenerate ODE at z={z[k]:.6g}: {reason}")
    partial = None
    if k >= 1:
        partial = TranslatorProfile(z[: k + 1], g[: k + 1], dg[: k + 1], speed, alpha, forcing)
    return DegenerateODEError(f"degenerate ODE at z={z[k]:.6g}: {reason}", partial)


# Radial profile


def radial_phi0(dimension: int) -> float:
    """phi(0) = 2 Gamma((n+1)/2) / Gamma(n/2) of the profile with phi'(inf) = 1."""
    return float(2.0 * gamma(0.5 * (dimension + 1)) / gamma(0.5 * dimension))


def _radial_solution(dimension: int, phi0: float, z_max: float):
    n = dimension

    def rhs(z: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], 0.5 * (y[0] - z * y[1]) - (n - 1) * y[1] / z])

    z0 = RADIAL_START
    start = [phi0 * (1.0 + z0 * z0 / (4.0 * n)), phi0 * z0 / (2.0 * n)]
    return solve_ivp(
        rhs, (z0, z_max), start, method="DOP853", rtol=1e-12, atol=1e-12, dense_output=True
    )


def radial_profile(dimension: int, z_max: float = RADIAL_Z_MAX) -> RadialProfile:
    """Shoot on phi(0) for phi'' + (n-1) phi'/z = (phi - z phi')/2 with phi'(z_max) = 1.

    Raises:
        ConvergenceError: bracket failure or |phi'(z_max) - 1| > 1e-6 after bisection
    """
    if dimension < 1:
        raise ConfigurationError("radial profile needs n >= 1")

    def mismatch(phi0: float) -> float:
        solution = _radial_solution(dimension, phi0, z_max)
        if not solution.success:
            raise ConvergenceError(f"radial profile integration failed: {solution.message}")
        return float(solution.y[1, -1]) - 1.0

    lo, hi = 0.1, 10.0
    for _ in range(40):
        if mismatch(lo) < 0.0:
            break
        lo *= 0.5
    else:
        raise ConvergenceError("bracket failure: phi'(z_max) > 1 for every small phi(0)")
    for _ in range(40):
        if mismatch(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("bracket failure: phi'(z_max) < 1 for every large phi(0)")

    phi0 = float(bisect(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    solution = _radial_solution(dimension, phi0, z_max)
    miss = abs(float(solution.y[1, -1]) - 1.0)
    if miss > 1e-6:
        raise ConvergenceError(f"radial profile: |phi'(z_max) - 1| = {miss:.3e} after bisection")

    nodes = np.linspace(0.0, z_max, RADIAL_NODES)
    dense = solution.sol(nodes[1:])
    phi = np.concatenate([[phi0], dense[0]])
    dphi = np.concatenate([[0.0], dense[1]])
    logger.info(f"radial(n={dimension}): phi(0)={phi0:.10g}")
    return RadialProfile(nodes, phi, dphi, dimension)


def supersolution_wa(
    profile: RadialProfile,
    a: float,
    x0: Sequence[float],
    mu: float,
    lam: float,
    v: float,
    base: float = 0.0,
) -> RadialBarrier:
    """w_a(x, t) = base + a + mu t + v sqrt(L t) phi(|x - x0| / sqrt(L t))."""
    return RadialBarrier(profile, a, x0, mu, lam, v, base, sign=1)


def subsolution_wa(
    profile: RadialProfile,
    a: float,
    x0: Sequence[float],
    mu: float,
    lam: float,
    v: float,
    base: float = 0.0,
) -> RadialBarrier:
    """Lower companion base - a - mu t - v sqrt(L t) phi(|x - x0| / sqrt(L t))."""
    return RadialBarrier(profile, a, x0, mu, lam, v, base, sign=-1)


def time_continuity_window(eps: float, mu: float, v: float, lam: float, phi0: float) -> float:
    """Largest delta with mu delta <= eps and v sqrt(L delta) phi(0) <= eps."""
    if not eps > 0.0:
        raise ConfigurationError("eps must be positive")
    drift = eps / mu if mu > 0.0 else np.inf
    spread = (eps / (v * phi0)) ** 2 / lam if v > 0.0 and phi0 > 0.0 else np.inf
    return float(min(drift, spread))


def doubled(profile: BarrierProfile) -> DoubledProfile:
    return DoubledProfile(profile)


def modulus_profile(s: Any, psi: Any) -> ModulusProfile:
    return ModulusProfile(np.asarray(s, dtype=float), np.asarray(psi, dtype=float))


# Boundary barriers


def dirichlet_barrier(
    model: CoefficientModel,
    sup_abs: float,
    length: float,
    t_max: float,
    constants: Optional[SphereConstants] = None,
    s_min: Optional[float] = None,
    lower_curvature: float = 0.0,
) -> BarrierProfile:
    """Barrier psi with psi(0, t) = 0 and psi -> S = sup|u0| for the Dirichlet boundary check.

    Heat and p-Laplacian flows use the self-similar profile of amplitude 2S, graphical mean
    curvature flow the curve-shortening profile, and anisotropic flows the forced curvature
    profile with alpha(s) = A s_min^2 / (1 + s_min^2 s^2).
    """
    amplitude = 2.0 * max(float(sup_abs), 1e-12)
    if isinstance(model, PLaplacianModel):
        return plap_barrier(model.exponent, amplitude, t_max)
    if isinstance(model, MCFModel):
        return csf_profile(length, t_max, amplitude)
    if isinstance(model, AnisotropicModel):
        if constants is None or s_min is None:
            raise ConfigurationError("anisotropic boundary barrier needs A and s_min")
        n = model.dimension
        forcing = 0.0
        if lower_curvature < 0.0:
            forcing = 2.0 * max(n - 2, 0) * constants.c**2 * abs(lower_curvature)
        return curvature_profile(
            anisotropic_alpha(constants.a, s_min),
            length,
            t_max,
            amplitude,
            forcing,
            label="anisotropic boundary",
        )
    raise ConfigurationError(f"no boundary barrier for model kind '{model.kind}'")


# Residual tables


def _default_grid(profile: BarrierProfile) -> Tuple[np.ndarray, np.ndarray]:
    horizon = profile.t_max if np.isfinite(profile.t_max) else 1.0
    times = np.geomspace(max(profile.t_min, 1e-3 * horizon, 1e-12), horizon, 9)
    if isinstance(profile, PLaplacianBarrier):
        reach = 3.0 * profile.amplitude ** (1.0 - 2.0 / profile.p) * horizon ** (1.0 / profile.p)
        return np.linspace(0.0, reach * profile.rp, 65), times
    if isinstance(profile, RadialProfile):
        return np.linspace(1e-3, profile.z_max, 201), np.array([0.0])
    return np.linspace(0.0, profile.length, 65), times


def residual_table(
    profile: BarrierProfile,
    z: Optional[Sequence[float]] = None,
    times: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Rows (z, t, phi, phi', phi'', residual) on a tensor grid.

    For p > 2 the residual is NaN within |xi - 1| < 1e-3 of the free boundary.
    """
    default_z, default_t = _default_grid(profile)
    z_grid = default_z if z is None else np.asarray(z, dtype=float)
    t_grid = default_t if times is None else np.asarray(times, dtype=float)

    rows = []
    for t in t_grid:
        residual = np.asarray(profile.residual(z_grid, float(t)), dtype=float)
        if isinstance(profile, PLaplacianBarrier) and profile.p > 2.0:
            xi = z_grid * profile.xi_scale(float(t))
            residual = np.where(np.abs(xi - 1.0) < FREE_BOUNDARY_BAND, np.nan, residual)
        rows.append(
            np.column_stack(
                [
                    z_grid,
                    np.full(z_grid.shape, float(t)),
                    profile.value(z_grid, float(t)),
                    profile.derivative(z_grid, float(t)),
                    profile.second_derivative(z_grid, float(t)),
                    residual,
                ]
            )
        )
    return np.vstack(rows)


def export_csv(profile: BarrierProfile, path: PathLike) -> int:
    """Write the residual table as CSV; returns the number of rows."""
    table = residual_table(profile)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = f"# {profile.label} kind={profile.kind.value}\nz,t,phi,dphi,ddphi,residual"
    np.savetxt(target, table, fmt="%.17g", delimiter=",", header=header, comments="")
    logger.info(f"{profile.label}: wrote {len(table)} rows to {target}")
    return int(len(table))


def profile_summary(profile: BarrierProfile) -> Dict[str, Any]:
    """Description plus the worst residual, used by the barrier subcommand."""
    summary = profile.describe()
    if isinstance(profile, TabulatedProfile):
        summary["min_residual"] = float(np.min(profile.discrete_residual()))
    elif profile.kind is ProfileKind.RADIAL:
        summary["max_abs_residual"] = float(np.max(np.abs(residual_table(profile)[:, 5])))
    else:
        summary["min_residual"] = float(np.nanmin(residual_table(profile)[:, 5]))
    return summary
