"""One-dimensional comparison profiles phi(z, t) and the space-time barriers built from them."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import beta as beta_fn
from scipy.special import betainc, erf

from ..core.exceptions import ConfigurationError, ProfileRangeError

AlphaFn = Callable[[np.ndarray], np.ndarray]


class ProfileKind(str, Enum):
    CLOSED_FORM = "closed_form"
    TABULATED = "tabulated"
    TRANSLATOR = "translator"
    RADIAL = "radial"


class BarrierProfile(ABC):
    """Comparison function phi(z, t) on z in [0, length], t in [t_min, t_max].

    Methods take an array ``z`` and a scalar ``t``. ``alpha`` is the coefficient of the
    one-dimensional equation phi_t = alpha(phi') phi'' + forcing the profile is built for.
    """

    kind: ProfileKind = ProfileKind.CLOSED_FORM

    def __init__(
        self,
        length: float,
        t_min: float,
        t_max: float,
        label: str,
        forcing: float = 0.0,
    ):
        self.length = float(length)
        self.t_min = float(t_min)
        self.t_max = float(t_max)
        self.label = label
        self.forcing = float(forcing)

    @abstractmethod
    def value(self, z: Any, t: float) -> np.ndarray:
        ...

    @abstractmethod
    def derivative(self, z: Any, t: float) -> np.ndarray:
        ...

    @abstractmethod
    def second_derivative(self, z: Any, t: float) -> np.ndarray:
        ...

    @abstractmethod
    def time_derivative(self, z: Any, t: float) -> np.ndarray:
        ...

    @abstractmethod
    def alpha(self, slope: np.ndarray) -> np.ndarray:
        ...

    @property
    def time_offset(self) -> float:
        """Time already elapsed in the profile's own clock at t = 0."""
        return 0.0

    def check_range(self, z_max: float, t: Optional[float] = None) -> None:
        if z_max > self.length * (1.0 + 1e-12):
            raise ProfileRangeError(
                f"{self.label}: profile covers z <= {self.length:.6g}, {z_max:.6g} requested"
            )
        if t is not None and not (self.t_min - 1e-12 <= t <= self.t_max * (1.0 + 1e-12)):
            raise ProfileRangeError(
                f"{self.label}: profile covers t in [{self.t_min:.6g}, {self.t_max:.6g}], t={t:.6g}"
            )

    def residual(self, z: Any, t: float) -> np.ndarray:
        """phi_t - alpha(phi') phi'' - forcing (non-negative for a supersolution)."""
        slope = np.abs(self.derivative(z, t))
        return (
            self.time_derivative(z, t)
            - self.alpha(slope) * self.second_derivative(z, t)
            - self.forcing
        )

    def describe(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "kind": self.kind.value,
            "length": self.length if np.isfinite(self.length) else None,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "forcing": self.forcing,
        }


def fp_closed_form(p: float, xi: Any) -> np.ndarray:
    """F_p(xi) through incomplete beta functions (and erf for p = 2)."""
    xi = np.asarray(xi, dtype=float)
    if p == 2.0:
        return 0.5 * np.sqrt(np.pi) * erf(xi)
    if p > 2.0:
        a = 1.0 / (p - 2.0)
        capped = np.minimum(xi, 1.0)
        return 0.5 * beta_fn(0.5, a + 1.0) * betainc(0.5, a + 1.0, capped * capped)
    b = 1.0 / (2.0 - p)
    return 0.5 * beta_fn(0.5, b - 0.5) * betainc(0.5, b - 0.5, xi * xi / (1.0 + xi * xi))


def fp_integrand(p: float, s: Any) -> np.ndarray:
    """F_p'(s): (1 - s^2)_+^{1/(p-2)}, exp(-s^2) or (1 + s^2)^{-1/(2-p)}."""
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return np.exp(-s * s)
    if p > 2.0:
        return np.clip(1.0 - s * s, 0.0, None) ** (1.0 / (p - 2.0))
    return (1.0 + s * s) ** (-1.0 / (2.0 - p))


def fp_integrand_derivative(p: float, s: Any) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if p == 2.0:
        return -2.0 * s * np.exp(-s * s)
    if p > 2.0:
        a = 1.0 / (p - 2.0)
        base = np.clip(1.0 - s * s, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            derivative = -2.0 * a * s * base ** (a - 1.0)
        return np.where(base > 0.0, derivative, 0.0)
    b = 1.0 / (2.0 - p)
    return -2.0 * b * s * (1.0 + s * s) ** (-b - 1.0)


class PLaplacianBarrier(BarrierProfile):
    """Self-similar p-Laplacian profile w(z, t) = M phi(z/M, t/M^2).

    phi(z, t) = F_p(z / (t^{1/p} R_p)) / (2 F_p(inf)); the profile increases from 0 to M/2.
    """

    kind = ProfileKind.CLOSED_FORM

    def __init__(self, p: float, amplitude: float, rp: float, f_inf: float, t_max: float = np.inf):
        if not p > 1.0:
            raise ConfigurationError(f"p-Laplacian barrier needs p > 1, got {p}")
        if not amplitude > 0.0:
            raise ConfigurationError("barrier amplitude must be positive")
        super().__init__(np.inf, 0.0, t_max, f"plaplacian(p={p:g}, M={amplitude:g})")
        self.p = float(p)
        self.amplitude = float(amplitude)
        self.rp = float(rp)
        self.f_inf = float(f_inf)

    def xi_scale(self, t: float) -> float:
        """d xi / d z at time t."""
        if t <= 0.0:
            raise ProfileRangeError(f"{self.label}: evaluated at t = {t} <= 0")
        m = self.amplitude
        return m ** (2.0 / self.p - 1.0) / (t ** (1.0 / self.p) * self.rp)

    def value(self, z: Any, t: float) -> np.ndarray:
        xi = np.asarray(z, dtype=float) * self.xi_scale(t)
        return self.amplitude * fp_closed_form(self.p, xi) / (2.0 * self.f_inf)

    def derivative(self, z: Any, t: float) -> np.ndarray:
        scale = self.xi_scale(t)
        xi = np.asarray(z, dtype=float) * scale
        return self.amplitude * fp_integrand(self.p, xi) * scale / (2.0 * self.f_inf)

    def second_derivative(self, z: Any, t: float) -> np.ndarray:
        scale = self.xi_scale(t)
        xi = np.asarray(z, dtype=float) * scale
        return self.amplitude * fp_integrand_derivative(self.p, xi) * scale**2 / (2.0 * self.f_inf)

    def time_derivative(self, z: Any, t: float) -> np.ndarray:
        xi = np.asarray(z, dtype=float) * self.xi_scale(t)
        return -self.amplitude * fp_integrand(self.p, xi) * xi / (self.p * t * 2.0 * self.f_inf)

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        slope = np.asarray(slope, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.p - 1.0) * slope ** (self.p - 2.0)

    def residual(self, z: Any, t: float) -> np.ndarray:
        slope = np.abs(self.derivative(z, t))
        second = self.second_derivative(z, t)
        # zero slope past the free boundary (p > 2) carries zero flux
        flux = np.where(slope > 0.0, self.alpha(np.where(slope > 0.0, slope, 1.0)) * second, 0.0)
        return self.time_derivative(z, t) - flux

    def max_slope(self, t: float) -> float:
        """M^{2/p} t^{-1/p} / (2 R_p F_p(inf)), attained at z = 0."""
        rate = self.amplitude ** (2.0 / self.p) * t ** (-1.0 / self.p)
        return rate / (2.0 * self.rp * self.f_inf)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "p": self.p, "amplitude": self.amplitude, "R_p": self.rp}


class TabulatedProfile(BarrierProfile):
    """Time slices of a solved profile, blended linearly in time and splined in z.

    Stored slices live in the solver's unit coordinates; the public profile is
    w(z, t) = M phi(z / M, t / M^2 + t_start).
    """

    kind = ProfileKind.TABULATED

    def __init__(
        self,
        nodes: np.ndarray,
        times: np.ndarray,
        values: np.ndarray,
        alpha: AlphaFn,
        label: str,
        amplitude: float = 1.0,
        forcing: float = 0.0,
        shape_checks: Optional[Dict[str, bool]] = None,
    ):
        self.nodes = np.asarray(nodes, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.amplitude = float(amplitude)
        self.t_start = float(self.times[0])
        self._alpha = alpha
        self._unit_forcing = float(forcing)
        self._splines: Dict[int, CubicSpline] = {}
        self.shape_checks = shape_checks or {}
        m = self.amplitude
        super().__init__(
            length=float(self.nodes[-1]) * m,
            t_min=0.0,
            t_max=(float(self.times[-1]) - self.t_start) * m * m,
            label=label,
            forcing=self._unit_forcing / m,
        )

    @property
    def time_offset(self) -> float:
        return self.t_start * self.amplitude**2

    def scaled(self, amplitude: float) -> "TabulatedProfile":
        """Same solved table viewed at another amplitude."""
        return TabulatedProfile(
            self.nodes,
            self.times,
            self.values,
            self._alpha,
            self.label,
            amplitude=amplitude,
            forcing=self._unit_forcing,
            shape_checks=self.shape_checks,
        )

    def _spline(self, index: int) -> CubicSpline:
        if index not in self._splines:
            self._splines[index] = CubicSpline(self.nodes, self.values[index])
        return self._splines[index]

    def _locate(self, z: Any, t: float):
        unit_z = np.asarray(z, dtype=float) / self.amplitude
        self.check_range(float(np.max(unit_z, initial=0.0)) * self.amplitude, t)
        tau = t / self.amplitude**2 + self.t_start
        i = int(np.clip(np.searchsorted(self.times, tau, side="right") - 1, 0, len(self.times) - 2))
        span = self.times[i + 1] - self.times[i]
        weight = float(np.clip((tau - self.times[i]) / span, 0.0, 1.0))
        return unit_z, i, weight, span

    def _blend(self, z: Any, t: float, order: int) -> np.ndarray:
        unit_z, i, w, _ = self._locate(z, t)
        return (1.0 - w) * self._spline(i)(unit_z, order) + w * self._spline(i + 1)(unit_z, order)

    def value(self, z: Any, t: float) -> np.ndarray:
        return self.amplitude * self._blend(z, t, 0)

    def derivative(self, z: Any, t: float) -> np.ndarray:
        return self._blend(z, t, 1)

    def second_derivative(self, z: Any, t: float) -> np.ndarray:
        return self._blend(z, t, 2) / self.amplitude

    def time_derivative(self, z: Any, t: float) -> np.ndarray:
        unit_z, i, _, span = self._locate(z, t)
        return (self._spline(i + 1)(unit_z) - self._spline(i)(unit_z)) / span / self.amplitude

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        return self._alpha(np.asarray(slope, dtype=float))

    def discrete_residual(self) -> np.ndarray:
        """Residual of the stored slices under the solver's own difference operator.

        Returns:
            Array of shape (slices - 1, nodes - 2) in unit coordinates
        """
        h = self.nodes[1] - self.nodes[0]
        dt = np.diff(self.times)[:, None]
        current = self.values[1:]
        slope = (current[:, 2:] - current[:, :-2]) / (2.0 * h)
        curvature = (current[:, 2:] - 2.0 * current[:, 1:-1] + current[:, :-2]) / (h * h)
        rate = (current[:, 1:-1] - self.values[:-1, 1:-1]) / dt
        return rate - self._alpha(np.abs(slope)) * curvature - self._unit_forcing

    def describe(self) -> Dict[str, Any]:
        return {
            **super().describe(),
            "amplitude": self.amplitude,
            "nodes": int(len(self.nodes)),
            "slices": int(len(self.times)),
            "time_offset": self.time_offset,
            "shape_checks": dict(self.shape_checks),
        }


class TranslatorProfile(BarrierProfile):
    """Translating profile phi(z, t) = g(z) + c t with c = alpha(g') g'' + B."""

    kind = ProfileKind.TRANSLATOR

    def __init__(
        self,
        nodes: np.ndarray,
        g: np.ndarray,
        dg: np.ndarray,
        speed: float,
        alpha: AlphaFn,
        forcing: float = 0.0,
        label: str = "translator",
    ):
        super().__init__(float(nodes[-1]), 0.0, np.inf, label, forcing)
        self.nodes = np.asarray(nodes, dtype=float)
        self.g = np.asarray(g, dtype=float)
        self.dg = np.asarray(dg, dtype=float)
        self.speed = float(speed)
        self._alpha = alpha
        self._spline = CubicHermiteSpline(self.nodes, self.g, self.dg)

    def value(self, z: Any, t: float) -> np.ndarray:
        self.check_range(float(np.max(np.asarray(z), initial=0.0)))
        return self._spline(np.asarray(z, dtype=float)) + self.speed * t

    def derivative(self, z: Any, t: float) -> np.ndarray:
        return self._spline(np.asarray(z, dtype=float), 1)

    def second_derivative(self, z: Any, t: float) -> np.ndarray:
        slope = self.derivative(z, t)
        return (self.speed - self.forcing) / self._alpha(np.abs(slope))

    def time_derivative(self, z: Any, t: float) -> np.ndarray:
        return np.full(np.shape(z), self.speed)

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        return self._alpha(np.asarray(slope, dtype=float))

    def interpolation_residual(self) -> float:
        """Largest |c - alpha(g') g'' - B| using the spline's own second derivative."""
        midpoints = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        slope = self._spline(midpoints, 1)
        second = self._spline(midpoints, 2)
        residual = self.speed - self._alpha(np.abs(slope)) * second - self.forcing
        return float(np.max(np.abs(residual)))

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "speed": self.speed, "initial_slope": float(self.dg[0])}


class RadialProfile(BarrierProfile):
    """Stationary radial profile phi'' + (n-1) phi'/z = (phi - z phi') / 2.

    Boundary conditions: phi'(0) = 0 and phi'(z) -> 1 as z grows.
    """

    kind = ProfileKind.RADIAL

    def __init__(self, nodes: np.ndarray, phi: np.ndarray, dphi: np.ndarray, dimension: int):
        super().__init__(np.inf, 0.0, np.inf, f"radial(n={dimension})")
        self.nodes = np.asarray(nodes, dtype=float)
        self.dimension = int(dimension)
        self.phi0 = float(phi[0])
        self.z_max = float(self.nodes[-1])
        self._phi = CubicSpline(self.nodes, phi)
        self._dphi = CubicSpline(self.nodes, dphi)

    def value(self, z: Any, t: float = 0.0) -> np.ndarray:
        z = np.abs(np.asarray(z, dtype=float))
        inside = np.minimum(z, self.z_max)
        far = np.maximum(z, self.z_max)
        tail = far + (float(self._phi(self.z_max)) - self.z_max) * self.z_max / far
        return np.where(z <= self.z_max, self._phi(inside), tail)

    def derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        z = np.abs(np.asarray(z, dtype=float))
        inside = np.minimum(z, self.z_max)
        far = np.maximum(z, self.z_max)
        tail = 1.0 - (float(self._phi(self.z_max)) - self.z_max) * self.z_max / (far * far)
        return np.where(z <= self.z_max, self._dphi(inside), tail)

    def second_derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        z = np.abs(np.asarray(z, dtype=float))
        far = np.maximum(z, self.z_max)
        tail = 2.0 * (float(self._phi(self.z_max)) - self.z_max) * self.z_max / far**3
        return np.where(z <= self.z_max, self._dphi(np.minimum(z, self.z_max), 1), tail)

    def time_derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        return np.zeros(np.shape(z))

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        return np.ones(np.shape(slope))

    def ode_residual(self, z: Any) -> np.ndarray:
        """phi'' + (n-1) phi'/z - (phi - z phi')/2 on the tabulated range."""
        z = np.asarray(z, dtype=float)
        phi = self._phi(z)
        dphi = self._dphi(z)
        second = self._dphi(z, 1)
        radial = np.where(z > 0.0, dphi / np.where(z > 0.0, z, 1.0), second)
        return second + (self.dimension - 1) * radial - 0.5 * (phi - z * dphi)

    def residual(self, z: Any, t: float = 0.0) -> np.ndarray:
        return self.ode_residual(z)

    def describe(self) -> Dict[str, Any]:
        return {
            **super().describe(),
            "dimension": self.dimension,
            "phi0": self.phi0,
            "z_max": self.z_max,
        }


class DoubledProfile(BarrierProfile):
    """2 phi(z/2, t): the form entering the doubled-variable functional."""

    def __init__(self, base: BarrierProfile):
        super().__init__(
            2.0 * base.length, base.t_min, base.t_max, f"doubled({base.label})", base.forcing
        )
        self.base = base
        self.kind = base.kind

    def value(self, z: Any, t: float) -> np.ndarray:
        return 2.0 * self.base.value(0.5 * np.asarray(z, dtype=float), t)

    def derivative(self, z: Any, t: float) -> np.ndarray:
        return self.base.derivative(0.5 * np.asarray(z, dtype=float), t)

    def second_derivative(self, z: Any, t: float) -> np.ndarray:
        return 0.5 * self.base.second_derivative(0.5 * np.asarray(z, dtype=float), t)

    def time_derivative(self, z: Any, t: float) -> np.ndarray:
        return 2.0 * self.base.time_derivative(0.5 * np.asarray(z, dtype=float), t)

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        return self.base.alpha(slope)

    def residual(self, z: Any, t: float) -> np.ndarray:
        return 2.0 * self.base.residual(0.5 * np.asarray(z, dtype=float), t)


class ModulusProfile(BarrierProfile):
    """Time-independent piecewise-linear modulus, e.g. an empirical concave majorant."""

    kind = ProfileKind.TABULATED

    def __init__(self, s: np.ndarray, psi: np.ndarray, label: str = "empirical modulus"):
        s = np.asarray(s, dtype=float)
        psi = np.asarray(psi, dtype=float)
        if s[0] != 0.0:
            s, psi = np.concatenate([[0.0], s]), np.concatenate([[0.0], psi])
        super().__init__(float(s[-1]), 0.0, np.inf, label)
        self.s = s
        self.psi = psi

    def value(self, z: Any, t: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        self.check_range(float(np.max(z, initial=0.0)))
        return np.interp(z, self.s, self.psi)

    def derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        slopes = np.diff(self.psi) / np.diff(self.s)
        position = np.searchsorted(self.s, np.asarray(z, dtype=float), side="right") - 1
        index = np.clip(position, 0, len(slopes) - 1)
        return slopes[index]

    def second_derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        return np.zeros(np.shape(z))

    def time_derivative(self, z: Any, t: float = 0.0) -> np.ndarray:
        return np.zeros(np.shape(z))

    def alpha(self, slope: np.ndarray) -> np.ndarray:
        return np.ones(np.shape(slope))


class RadialBarrier:
    """Space-time barrier built from the radial profile around a point x0.

    ``sign = +1`` gives w_a = base + a + mu t + v sqrt(L t) phi(|x - x0| / sqrt(L t)); ``sign = -1``
    gives the lower companion base - a - mu t - v sqrt(L t) phi(...).
    """

    def __init__(
        self,
        profile: RadialProfile,
        a: float,
        x0: Any,
        mu: float,
        lam: float,
        v: float,
        base: float = 0.0,
        sign: int = 1,
    ):
        if not a > 0.0 or mu < 0.0 or not lam > 0.0 or v < 0.0:
            raise ConfigurationError("barrier needs a > 0, mu >= 0, Lambda > 0 and v >= 0")
        self.profile = profile
        self.a = float(a)
        self.x0 = np.asarray(x0, dtype=float)
        self.mu = float(mu)
        self.lam = float(lam)
        self.v = float(v)
        self.base = float(base)
        self.sign = 1 if sign >= 0 else -1

    def __call__(self, x: Any, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - self.x0, axis=-1)
        if t <= 0.0:
            spread = self.v * r
        else:
            root = np.sqrt(self.lam * t)
            spread = self.v * root * self.profile.value(r / root)
        return self.base + self.sign * (self.a + self.mu * t + spread)
