"""Finsler norms, mobilities and the anisotropic boundary geometry they induce."""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..core.exceptions import ConfigurationError, DomainError, NotStrictlyConvexError
from ..utils.helpers import sphere_samples
from ..utils.validators import validate_symmetric_positive_definite
from .grid import DomainKind, DomainSpec

CONVEXITY_THRESHOLD = 1e-4


class Norm(ABC):
    """Positively 1-homogeneous convex function with analytic first and second derivatives.

    All methods are vectorised over leading axes: ``z`` has shape ``(..., d)``.
    """

    name: str = "norm"

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def hessian(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def restricted(self, dimension: int) -> "Norm":
        """The norm restricted to the first ``dimension`` coordinates (trailing ones set to 0)."""

    def dual_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        """Dual norm sup{v.p : F(p) <= 1} when a closed form exists."""
        return None

    def dual_gradient_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        return None

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


class EuclideanNorm(Norm):
    name = "euclidean"

    def value(self, z: np.ndarray) -> np.ndarray:
        return np.linalg.norm(z, axis=-1)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def hessian(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)[..., None, None]
        unit = z[..., :, None] * z[..., None, :] / (r * r)
        return (np.eye(z.shape[-1]) - unit) / r

    def restricted(self, dimension: int) -> "Norm":
        return EuclideanNorm()

    def dual_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        return np.linalg.norm(v, axis=-1)

    def dual_gradient_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        return self.gradient(v)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name}


class EllipsoidNorm(Norm):
    """F(z) = sqrt(z^T Q z) for a symmetric positive definite Q."""

    name = "ellipsoid"

    def __init__(self, q: Any):
        matrix = np.asarray(q, dtype=float)
        if not validate_symmetric_positive_definite(matrix):
            raise ConfigurationError("ellipsoid matrix Q must be symmetric positive definite")
        self.q = 0.5 * (matrix + matrix.T)
        self.q_inverse = np.linalg.inv(self.q)

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", z, self.q, z))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return (z @ self.q) / self.value(z)[..., None]

    def hessian(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        f = self.value(z)[..., None, None]
        qz = z @ self.q
        return (self.q - qz[..., :, None] * qz[..., None, :] / (f * f)) / f

    def restricted(self, dimension: int) -> "Norm":
        return EllipsoidNorm(self.q[:dimension, :dimension])

    def dual_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", v, self.q_inverse, v))

    def dual_gradient_closed_form(self, v: np.ndarray) -> Optional[np.ndarray]:
        v = np.asarray(v, dtype=float)
        dual = self.dual_closed_form(v)
        assert dual is not None
        return (v @ self.q_inverse) / dual[..., None]

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "q": self.q.tolist()}


class QuarticPerturbedNorm(Norm):
    """F(z) = (|z|^4 + eps * sum z_k^4)^(1/4).

    Strict convexity weakens as eps grows: at a coordinate axis the tangential second
    derivative equals (1 + eps)^(-3/4).
    """

    name = "quartic"

    def __init__(self, epsilon: float = 0.3):
        if not np.isfinite(epsilon) or epsilon < 0.0:
            raise ConfigurationError(f"quartic perturbation must be finite and >= 0, got {epsilon}")
        self.epsilon = float(epsilon)

    def _g(self, z: np.ndarray) -> np.ndarray:
        r2 = np.sum(z * z, axis=-1)
        return r2 * r2 + self.epsilon * np.sum(z**4, axis=-1)

    def _dg(self, z: np.ndarray) -> np.ndarray:
        r2 = np.sum(z * z, axis=-1, keepdims=True)
        return 4.0 * r2 * z + 4.0 * self.epsilon * z**3

    def value(self, z: np.ndarray) -> np.ndarray:
        return self._g(np.asarray(z, dtype=float)) ** 0.25

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 0.25 * self._g(z)[..., None] ** -0.75 * self._dg(z)

    def hessian(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        d = z.shape[-1]
        g = self._g(z)[..., None, None]
        dg = self._dg(z)
        r2 = np.sum(z * z, axis=-1)[..., None, None]
        d2g = (
            4.0 * r2 * np.eye(d)
            + 8.0 * z[..., :, None] * z[..., None, :]
            + 12.0 * self.epsilon * (z**2)[..., None, :] * np.eye(d)
        )
        outer = dg[..., :, None] * dg[..., None, :]
        return 0.25 * g**-0.75 * d2g - (3.0 / 16.0) * g**-1.75 * outer

    def restricted(self, dimension: int) -> "Norm":
        return QuarticPerturbedNorm(self.epsilon)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "epsilon": self.epsilon}


class Mobility(ABC):
    """Positive 0-homogeneous mobility on covectors."""

    name: str = "mobility"

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


class ConstantMobility(Mobility):
    name = "constant"

    def __init__(self, value: float = 1.0):
        if not value > 0.0:
            raise ConfigurationError("constant mobility must be positive")
        self.constant = float(value)

    def value(self, z: np.ndarray) -> np.ndarray:
        return np.full(np.shape(z)[:-1], self.constant)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "value": self.constant}


class TiltedMobility(Mobility):
    """m(z) = 1 + delta * z_last / |z| with |delta| < 1."""

    name = "tilted"

    def __init__(self, delta: float):
        if not abs(delta) < 1.0:
            raise ConfigurationError(f"tilted mobility needs |delta| < 1, got {delta}")
        self.delta = float(delta)

    def value(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return 1.0 + self.delta * z[..., -1] / np.linalg.norm(z, axis=-1)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "delta": self.delta}


class AnisotropyModel:
    """A norm and a mobility on (n+1)-covectors, reduced to gradients p in R^n.

    F(p) = F(p, -1) and m(p) = m(p, -1) drive the anisotropic flow; the restricted norm
    F~(p) = F(p, 0) governs the boundary geometry.
    """

    def __init__(self, norm: Norm, mobility: Mobility, dimension: int, check: bool = True):
        if dimension < 1:
            raise ConfigurationError("anisotropy needs dimension n >= 1")
        self.norm = norm
        self.mobility = mobility
        self.dimension = int(dimension)
        self.restricted_norm = norm.restricted(self.dimension)
        if isinstance(norm, EllipsoidNorm) and norm.q.shape != (dimension + 1, dimension + 1):
            raise ConfigurationError(
                f"ellipsoid matrix must be {(dimension + 1)}x{(dimension + 1)} for n = {dimension}"
            )
        if check:
            self._check_admissible()

    @property
    def name(self) -> str:
        return f"{self.norm.name}/{self.mobility.name}"

    def lift(self, p: np.ndarray, last: float = -1.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        tail = np.full(p.shape[:-1] + (1,), last)
        return np.concatenate([p, tail], axis=-1)

    def tangential_minimum(self, q: np.ndarray) -> np.ndarray:
        """Smallest eigenvalue of D^2F on the tangent space at unit covectors ``q``."""
        hessians = self.norm.hessian(q)
        # project onto the complement of q: eigenvalue 0 along q is replaced by a large value
        radial = q[..., :, None] * q[..., None, :]
        shift = np.max(np.abs(hessians)) + 1.0
        return np.linalg.eigvalsh(hessians + shift * radial)[..., 0]

    def _check_admissible(self) -> None:
        d = self.dimension + 1
        count = {2: 512, 3: 1024}.get(d, 2048)
        samples = np.vstack([sphere_samples(d, count), np.eye(d), -np.eye(d)])
        if np.any(self.norm.value(samples) <= 0.0) or np.any(self.mobility.value(samples) <= 0.0):
            raise ConfigurationError(
                f"{self.name}: norm and mobility must be positive on the sphere"
            )
        a1 = float(np.min(self.tangential_minimum(samples)))
        if a1 <= CONVEXITY_THRESHOLD:
            raise NotStrictlyConvexError(
                f"{self.name}: sampled tangential convexity {a1:.3e} is below {CONVEXITY_THRESHOLD}"
            )

    # Reduced quantities on gradients p

    def F(self, p: np.ndarray) -> np.ndarray:
        return self.norm.value(self.lift(p))

    def DF(self, p: np.ndarray) -> np.ndarray:
        return self.norm.gradient(self.lift(p))[..., : self.dimension]

    def D2F(self, p: np.ndarray) -> np.ndarray:
        n = self.dimension
        return self.norm.hessian(self.lift(p))[..., :n, :n]

    def m(self, p: np.ndarray) -> np.ndarray:
        return self.mobility.value(self.lift(p))

    def coefficient_matrix(self, p: np.ndarray) -> np.ndarray:
        """a^{ij}(p) = m(p) F(p) D_iD_jF(p)."""
        z = self.lift(p)
        n = self.dimension
        factor = (self.mobility.value(z) * self.norm.value(z))[..., None, None]
        return factor * self.norm.hessian(z)[..., :n, :n]

    def F_tilde(self, p: np.ndarray) -> np.ndarray:
        return self.restricted_norm.value(p)

    def DF_tilde(self, p: np.ndarray) -> np.ndarray:
        return self.restricted_norm.gradient(p)

    def D2F_tilde(self, p: np.ndarray) -> np.ndarray:
        return self.restricted_norm.hessian(p)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "norm": self.norm.to_dict(),
            "mobility": self.mobility.to_dict(),
            "dimension": self.dimension,
        }


class BoundaryGeometry:
    """Planar boundary of a disk or rectangle (or the two ends of an interval).

    The boundary is parametrised by arclength ``s``; disks start at angle 0, rectangles at the
    lower-left corner, both counter-clockwise. Curvatures use the convention A_y = -Dn, so convex
    boundaries have non-negative curvature.
    """

    def __init__(self, domain: DomainSpec, anisotropy: Optional[AnisotropyModel] = None):
        if domain.is_periodic:
            raise DomainError("periodic cells have no boundary")
        if domain.dimension > 2:
            raise DomainError("boundary geometry supports intervals and planar domains only")
        self.domain = domain
        self.anisotropy = anisotropy
        if domain.kind is DomainKind.DISK:
            self.perimeter = 2.0 * np.pi * domain.radius
            self.corners = np.array([])
        elif domain.dimension == 2:
            width, height = np.array(domain.upper) - np.array(domain.lower)
            self.perimeter = 2.0 * (width + height)
            self.corners = np.cumsum([width, height, width])
        else:
            self.perimeter = 0.0
            self.corners = np.array([])

    @property
    def is_interval(self) -> bool:
        return self.domain.dimension == 1

    def _rectangle_frame(self, s: np.ndarray):
        lower = np.array(self.domain.lower)
        upper = np.array(self.domain.upper)
        s = np.mod(s, self.perimeter)
        edges = np.searchsorted(self.corners, s, side="right")
        offsets = s - np.concatenate([[0.0], self.corners])[edges]

        starts = np.array([lower, [upper[0], lower[1]], upper, [lower[0], upper[1]]])
        tangents = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        points = starts[edges] + offsets[..., None] * tangents[edges]
        return points, tangents[edges]

    def point(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.domain.kind is DomainKind.DISK:
            theta = s / self.domain.radius
            circle = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            return np.array(self.domain.center) + self.domain.radius * circle
        return self._rectangle_frame(s)[0]

    def tangent(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.domain.kind is DomainKind.DISK:
            theta = s / self.domain.radius
            return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        return self._rectangle_frame(s)[1]

    def inward_normal(self, s: np.ndarray) -> np.ndarray:
        """Euclidean inward unit normal (tangent rotated by +90 degrees)."""
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def euclidean_curvature(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.domain.kind is DomainKind.DISK:
            return np.full(s.shape, 1.0 / self.domain.radius)
        return np.zeros(s.shape)

    def _restricted(self) -> Norm:
        return self.anisotropy.restricted_norm if self.anisotropy is not None else EuclideanNorm()

    def anisotropic_normal(self, s: np.ndarray) -> np.ndarray:
        """Inward anisotropic normal n(y) = DF~(nu) with F*(n) = 1."""
        return self._restricted().gradient(self.inward_normal(s))

    def curvature(self, s: np.ndarray) -> np.ndarray:
        """Anisotropic principal curvature kappa_E * tau^T D^2F~(nu) tau."""
        tau = self.tangent(s)
        hessian = self._restricted().hessian(self.inward_normal(s))
        weight = np.einsum("...i,...ij,...j->...", tau, hessian, tau)
        return self.euclidean_curvature(s) * weight

    def shape_operator(self, s: float) -> np.ndarray:
        """A_y = -Dn as a 2x2 matrix acting on the tangent line."""
        tau = self.tangent(np.asarray(s, dtype=float))
        nu = self.inward_normal(np.asarray(s, dtype=float))
        kappa = float(self.euclidean_curvature(np.asarray(s)))
        return kappa * self._restricted().hessian(nu) @ np.outer(tau, tau)

    def lower_curvature_bound(self, samples: int = 1024) -> float:
        """C_1 = min anisotropic curvature over the boundary samples."""
        if self.is_interval:
            return 0.0
        s = (np.arange(samples) + 0.5) * self.perimeter / samples
        return float(np.min(self.curvature(s)))


@dataclass(frozen=True)
class SphereConstants:
    """Bounds of the norm and mobility on the unit sphere.

    ``a1`` bounds the tangential Hessian from below, ``a2`` bounds m F from below,
    ``a = a1 * a2`` is the ellipticity constant and ``c`` collects the upper bounds.
    """

    a1: float
    a2: float
    a: float
    c: float
    components: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class DistanceResult:
    """Anisotropic distance d(x) = inf F*(x - y) with its foot point and normal."""

    distance: float
    foot: np.ndarray
    normal: np.ndarray
    parameter: float


@dataclass(frozen=True)
class LevelSetGeometry:
    """Second-order data of the distance function at an interior point."""

    distance: float
    curvatures: List[float]
    laplacian: float
    level_set_mean_curvature: float
    euclidean_formula: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
