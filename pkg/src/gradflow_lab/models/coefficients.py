"""Coefficient models a^{ij}(p, t), b(p, t) of quasilinear gradient flows."""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..core.exceptions import ConfigurationError
from .anisotropy import AnisotropyModel


def _unit_projection(p: np.ndarray):
    """Return (|p|, p p^T / |p|^2) with the projection set to 0 where p = 0."""
    r = np.linalg.norm(p, axis=-1)
    safe = np.where(r > 0.0, r, 1.0)
    unit = p / safe[..., None]
    projection = unit[..., :, None] * unit[..., None, :]
    return r, projection


class CoefficientModel(ABC):
    """Evaluator of the coefficient matrix and drift, vectorised over leading axes of ``p``."""

    kind: str = "model"
    autonomous: bool = True

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ConfigurationError("coefficient models need dimension n >= 1")
        self.dimension = int(dimension)

    @abstractmethod
    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Coefficient matrix of shape ``(..., n, n)``."""

    def drift(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        return np.zeros(np.shape(p)[:-1])

    def closed_form_alpha(self, radius: np.ndarray, t: float = 0.0) -> Optional[np.ndarray]:
        """Degeneracy scalar alpha(R, t) when a closed form is known."""
        return None

    @abstractmethod
    def energy_density(self, p: np.ndarray) -> np.ndarray:
        """Energy density whose gradient flow the model describes (energy proxy)."""

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension}


class MCFModel(CoefficientModel):
    """Graphical mean curvature flow: a(p) = I - p p^T / (1 + |p|^2)."""

    kind = "mcf"

    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        outer = p[..., :, None] * p[..., None, :]
        denominator = 1.0 + np.sum(p * p, axis=-1)
        return np.eye(self.dimension) - outer / denominator[..., None, None]

    def closed_form_alpha(self, radius: np.ndarray, t: float = 0.0) -> Optional[np.ndarray]:
        return 1.0 / (1.0 + np.asarray(radius, dtype=float) ** 2)

    def energy_density(self, p: np.ndarray) -> np.ndarray:
        return np.sqrt(1.0 + np.sum(np.asarray(p) ** 2, axis=-1))


@dataclass(frozen=True)
class ScalarFunction:
    """Radial coefficient function of |p|.

    Forms: ``constant`` (c), ``power`` (c * r^k, needs k >= 0 so the value at 0 is finite),
    ``curvature`` (c / (1 + r^2)).
    """

    form: str
    coefficient: float = 1.0
    exponent: float = 0.0

    def __post_init__(self) -> None:
        if self.form not in ("constant", "power", "curvature"):
            raise ConfigurationError(f"unknown scalar function form '{self.form}'")
        if self.coefficient <= 0.0:
            raise ConfigurationError("scalar coefficient functions must be positive")
        if self.form == "power" and self.exponent < 0.0:
            raise ConfigurationError("power coefficients need a non-negative exponent")

    def __call__(self, r: np.ndarray, t: float = 0.0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.form == "constant":
            return np.full(r.shape, self.coefficient)
        if self.form == "power":
            return self.coefficient * r**self.exponent
        return self.coefficient / (1.0 + r * r)


class IsotropicModel(CoefficientModel):
    """a(p) = alpha(|p|) p^ p^T + beta(|p|) (I - p^ p^T), alpha(0) I at p = 0."""

    kind = "isotropic"

    def __init__(self, dimension: int, alpha: ScalarFunction, beta: ScalarFunction):
        super().__init__(dimension)
        if not np.isclose(float(alpha(np.array(0.0))), float(beta(np.array(0.0))), rtol=1e-12):
            raise ConfigurationError("isotropic model needs alpha(0) = beta(0)")
        self.alpha = alpha
        self.beta = beta

    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        r, projection = _unit_projection(p)
        a = self.alpha(r, t)[..., None, None]
        b = self.beta(r, t)[..., None, None]
        identity = np.eye(self.dimension)
        result = a * projection + b * (identity - projection)
        at_zero = (r == 0.0)[..., None, None]
        return np.where(at_zero, a * identity, result)

    def closed_form_alpha(self, radius: np.ndarray, t: float = 0.0) -> Optional[np.ndarray]:
        # radial direction attains the infimum of the gradient-direction quotient for beta >= 0
        return self.alpha(np.asarray(radius, dtype=float), t)

    def energy_density(self, p: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(np.asarray(p) ** 2, axis=-1)

    def describe(self) -> Dict[str, Any]:
        return {
            **super().describe(),
            "alpha": asdict(self.alpha),
            "beta": asdict(self.beta),
        }


class PLaplacianModel(CoefficientModel):
    """p-Laplacian heat flow: a(q) = r^{p-2} (I + (p-2) q^ q^T), r = sqrt(|q|^2 + eps^2)."""

    kind = "plaplacian"

    def __init__(self, dimension: int, exponent: float, epsilon: Optional[float] = None):
        super().__init__(dimension)
        if not np.isfinite(exponent) or exponent <= 1.0:
            raise ConfigurationError(f"p-Laplacian exponent must exceed 1, got {exponent}")
        if epsilon is None:
            epsilon = 1e-8 if exponent < 2.0 else 0.0
        if epsilon < 0.0:
            raise ConfigurationError("regularization must be non-negative")
        self.exponent = float(exponent)
        self.epsilon = float(epsilon)

    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        q = np.asarray(p, dtype=float)
        magnitude, projection = _unit_projection(q)
        r = np.sqrt(magnitude**2 + self.epsilon**2)
        power = self.exponent - 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            limit = 1.0 if power == 0.0 else (0.0 if power > 0.0 else np.inf)
            scale = np.where(r > 0.0, r**power, limit)
        identity = np.eye(self.dimension)
        result = scale[..., None, None] * (identity + power * projection)
        # at q = 0 the radial direction is undefined; use the isotropic limit (p-1) r^{p-2}
        at_zero = (magnitude == 0.0)[..., None, None]
        return np.where(at_zero, (self.exponent - 1.0) * scale[..., None, None] * identity, result)

    def closed_form_alpha(self, radius: np.ndarray, t: float = 0.0) -> Optional[np.ndarray]:
        radius = np.asarray(radius, dtype=float)
        r = np.sqrt(radius**2 + self.epsilon**2)
        with np.errstate(divide="ignore"):
            return (self.exponent - 1.0) * r ** (self.exponent - 2.0)

    def energy_density(self, p: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(p), axis=-1)
        return r**self.exponent / self.exponent

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "p": self.exponent, "epsilon": self.epsilon}


class AnisotropicModel(CoefficientModel):
    """Anisotropic mean curvature flow with a(p) = m(p) F(p) D^2F(p)."""

    kind = "anisotropic"

    def __init__(self, anisotropy: AnisotropyModel):
        super().__init__(anisotropy.dimension)
        self.anisotropy = anisotropy

    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.anisotropy.coefficient_matrix(p)

    def energy_density(self, p: np.ndarray) -> np.ndarray:
        return self.anisotropy.F(p)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), **self.anisotropy.to_dict()}


class CustomModel(CoefficientModel):
    """User-supplied matrix and drift functions of (p, t)."""

    kind = "custom"
    autonomous = False

    def __init__(
        self,
        dimension: int,
        matrix_fn: Callable[[np.ndarray, float], np.ndarray],
        drift_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
        label: str = "custom",
    ):
        super().__init__(dimension)
        self.matrix_fn = matrix_fn
        self.drift_fn = drift_fn
        self.label = label

    def matrix(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        values = np.asarray(self.matrix_fn(p, t), dtype=float)
        return np.broadcast_to(values, p.shape[:-1] + (self.dimension, self.dimension)).copy()

    def drift(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.drift_fn is None:
            return np.zeros(p.shape[:-1])
        return np.broadcast_to(np.asarray(self.drift_fn(p, t), dtype=float), p.shape[:-1]).copy()

    def energy_density(self, p: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(np.asarray(p) ** 2, axis=-1)

    @classmethod
    def constant(cls, matrix: Any, drift: float = 0.0) -> "CustomModel":
        """Constant coefficient matrix and drift (the configurable custom variant)."""
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError("custom coefficient matrix must be square")
        a = 0.5 * (a + a.T)
        if np.linalg.eigvalsh(a)[0] < 0.0:
            raise ConfigurationError("custom coefficient matrix must be positive semi-definite")
        drift_fn = None if drift == 0.0 else (lambda p, t: np.full(np.shape(p)[:-1], drift))
        return cls(a.shape[0], lambda p, t: a, drift_fn, label="constant")

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension, "label": self.label}


@dataclass
class DegeneracyProfile:
    """Sampled map R -> alpha(R, t) on a log-spaced grid, with (A0, P) when certified."""

    radii: np.ndarray
    alpha: np.ndarray
    time: float = 0.0
    a0: Optional[float] = None
    p_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        self.radii = np.asarray(self.radii, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        if np.any(self.alpha <= 0.0):
            raise ConfigurationError("degeneracy profile values must be positive")

    @property
    def scaled(self) -> np.ndarray:
        """alpha(R) R^2 on the grid."""
        return self.alpha * self.radii**2

    def holds(self) -> bool:
        if self.a0 is None or self.p_threshold is None:
            return False
        mask = self.radii >= self.p_threshold
        return bool(np.all(self.scaled[mask] >= self.a0 * (1.0 - 1e-12)))

    def to_dict(self) -> Dict[str, Any]:
        rows: List[List[float]] = [[float(r), float(a)] for r, a in zip(self.radii, self.alpha)]
        return {"time": self.time, "a0": self.a0, "P": self.p_threshold, "table": rows}
