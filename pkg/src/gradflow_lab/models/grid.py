"""Structured grids: lattices, domains and sampled grid functions."""

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import DomainError

MIN_RESOLUTION = 8


class BoundaryCondition(str, Enum):
    """Boundary condition tag of a domain."""

    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class DomainKind(str, Enum):
    """Geometric variant of a domain."""

    PERIODIC_CELL = "periodic"
    RECTANGLE = "rectangle"
    DISK = "disk"


@dataclass(frozen=True)
class LatticeSpec:
    """Fundamental cell of a periodic lattice.

    Rows of ``generators`` are the lattice vectors v_1..v_n; the cell is sampled at
    ``resolution[i]`` points along each generator.
    """

    generators: Tuple[Tuple[float, ...], ...]
    resolution: Tuple[int, ...]

    def __post_init__(self) -> None:
        generators = tuple(tuple(float(c) for c in row) for row in self.generators)
        resolution = tuple(int(r) for r in self.resolution)
        object.__setattr__(self, "generators", generators)
        object.__setattr__(self, "resolution", resolution)

        n = len(generators)
        if n < 1 or any(len(row) != n for row in generators):
            raise DomainError("lattice needs n generators of length n")
        if len(resolution) != n:
            raise DomainError(f"lattice of dimension {n} needs {n} resolutions")
        if min(resolution) < MIN_RESOLUTION:
            raise DomainError(f"resolution must be at least {MIN_RESOLUTION} per axis")
        matrix = np.array(generators)
        norms = np.prod(np.linalg.norm(matrix, axis=1))
        if abs(np.linalg.det(matrix)) <= 1e-12 * norms:
            raise DomainError("lattice generators are linearly dependent")

    @property
    def dimension(self) -> int:
        return len(self.generators)

    @property
    def matrix(self) -> np.ndarray:
        """Generator matrix V with the generators as rows."""
        return np.array(self.generators)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def diameter(self) -> float:
        """Diameter of the fundamental parallelepiped."""
        signs = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=self.dimension)))
        return float(np.max(np.linalg.norm(signs @ self.matrix, axis=1)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "generators": [list(row) for row in self.generators],
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatticeSpec":
        generators = tuple(tuple(row) for row in data["generators"])
        return cls(generators=generators, resolution=tuple(data["resolution"]))


@dataclass(frozen=True)
class DomainSpec:
    """Periodic cell, rectangle or disk with its boundary condition.

    Grids are vertex-centered. A periodic cell samples ``N_i`` points per generator; rectangles and
    disks sample ``N_i + 1`` points per axis including both ends, disks on the bounding square
    with a mask.
    """

    kind: DomainKind
    boundary: BoundaryCondition
    lattice: Optional[LatticeSpec] = None
    lower: Tuple[float, ...] = ()
    upper: Tuple[float, ...] = ()
    center: Tuple[float, ...] = ()
    radius: float = 0.0
    resolution: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DomainKind(self.kind))
        object.__setattr__(self, "boundary", BoundaryCondition(self.boundary))
        object.__setattr__(self, "lower", tuple(float(c) for c in self.lower))
        object.__setattr__(self, "upper", tuple(float(c) for c in self.upper))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

        if self.kind is DomainKind.PERIODIC_CELL:
            if self.lattice is None:
                raise DomainError("periodic cell needs a lattice")
            if self.boundary is not BoundaryCondition.PERIODIC:
                raise DomainError("periodic cells only carry the periodic boundary tag")
            object.__setattr__(self, "resolution", self.lattice.resolution)
            return

        if self.boundary is BoundaryCondition.PERIODIC:
            raise DomainError("periodic boundary tag requires a periodic cell")
        resolution = tuple(int(r) for r in self.resolution)
        object.__setattr__(self, "resolution", resolution)
        if not resolution or min(resolution) < MIN_RESOLUTION:
            raise DomainError(f"resolution must be at least {MIN_RESOLUTION} per axis")

        if self.kind is DomainKind.RECTANGLE:
            if len(self.lower) != len(self.upper) or len(self.lower) != len(resolution):
                raise DomainError("rectangle corners and resolution disagree in dimension")
            if any(u <= l for l, u in zip(self.lower, self.upper)):
                raise DomainError("rectangle needs positive side lengths")
        else:
            if self.radius <= 0.0:
                raise DomainError("disk needs a positive radius")
            if len(self.center) != len(resolution):
                raise DomainError("disk center and resolution disagree in dimension")
            if len(set(resolution)) != 1:
                raise DomainError("disk grids use one resolution for every axis")

    # Constructors

    @classmethod
    def periodic(
        cls, generators: Sequence[Sequence[float]], resolution: Sequence[int]
    ) -> "DomainSpec":
        lattice = LatticeSpec(tuple(map(tuple, generators)), tuple(resolution))
        return cls(DomainKind.PERIODIC_CELL, BoundaryCondition.PERIODIC, lattice=lattice)

    @classmethod
    def unit_periodic(cls, dimension: int, resolution: int) -> "DomainSpec":
        """Unit square/cube cell with the same resolution on every axis."""
        return cls.periodic(np.eye(dimension).tolist(), [resolution] * dimension)

    @classmethod
    def rectangle(
        cls,
        lower: Sequence[float],
        upper: Sequence[float],
        resolution: Sequence[int],
        boundary: BoundaryCondition = BoundaryCondition.DIRICHLET,
    ) -> "DomainSpec":
        return cls(
            DomainKind.RECTANGLE,
            BoundaryCondition(boundary),
            lower=tuple(lower),
            upper=tuple(upper),
            resolution=tuple(resolution),
        )

    @classmethod
    def disk(
        cls,
        center: Sequence[float],
        radius: float,
        resolution: int,
        boundary: BoundaryCondition = BoundaryCondition.DIRICHLET,
    ) -> "DomainSpec":
        return cls(
            DomainKind.DISK,
            BoundaryCondition(boundary),
            center=tuple(center),
            radius=radius,
            resolution=(int(resolution),) * len(center),
        )

    # Geometry

    @property
    def dimension(self) -> int:
        return len(self.resolution)

    @property
    def is_periodic(self) -> bool:
        return self.kind is DomainKind.PERIODIC_CELL

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.is_periodic:
            return tuple(self.resolution)
        return tuple(r + 1 for r in self.resolution)

    @property
    def spacing(self) -> np.ndarray:
        """Grid spacing in the stencil coordinates (fractional coordinates on lattices)."""
        res = np.array(self.resolution, dtype=float)
        if self.is_periodic:
            return 1.0 / res
        if self.kind is DomainKind.RECTANGLE:
            return (np.array(self.upper) - np.array(self.lower)) / res
        return np.full(self.dimension, 2.0 * self.radius) / res

    @property
    def transform(self) -> np.ndarray:
        """Matrix T with D_x = T D_s mapping stencil-coordinate derivatives to space."""
        if self.is_periodic:
            assert self.lattice is not None
            return self.lattice.inverse
        return np.eye(self.dimension)

    @property
    def physical_spacing(self) -> np.ndarray:
        if self.is_periodic:
            assert self.lattice is not None
            return np.linalg.norm(self.lattice.matrix, axis=1) / np.array(self.resolution)
        return self.spacing

    @property
    def h_min(self) -> float:
        return float(np.min(self.physical_spacing))

    @property
    def h_max(self) -> float:
        return float(np.max(self.physical_spacing))

    @property
    def origin(self) -> np.ndarray:
        if self.is_periodic:
            return np.zeros(self.dimension)
        if self.kind is DomainKind.RECTANGLE:
            return np.array(self.lower)
        return np.array(self.center) - self.radius

    def diameter(self) -> float:
        if self.is_periodic:
            assert self.lattice is not None
            return self.lattice.diameter()
        if self.kind is DomainKind.RECTANGLE:
            return float(np.linalg.norm(np.array(self.upper) - np.array(self.lower)))
        return 2.0 * self.radius

    def max_pair_distance(self) -> float:
        """Largest distance between two samples (minimal-image distances on lattices)."""
        if self.is_periodic:
            return 0.5 * self.diameter()
        return self.diameter()

    def coordinates(self) -> np.ndarray:
        """Sample coordinates, shape ``(*shape, n)``."""
        axes = [np.arange(s, dtype=float) for s in self.shape]
        grids = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        if self.is_periodic:
            assert self.lattice is not None
            return (grids * self.spacing) @ self.lattice.matrix
        return self.origin + grids * self.spacing

    def interior_mask(self) -> np.ndarray:
        """Samples updated by the evolution (the unknowns)."""
        shape = self.shape
        if self.is_periodic:
            return np.ones(shape, dtype=bool)
        if self.kind is DomainKind.RECTANGLE:
            mask = np.ones(shape, dtype=bool)
            if self.boundary is BoundaryCondition.DIRICHLET:
                for axis in range(self.dimension):
                    index = [slice(None)] * self.dimension
                    index[axis] = 0
                    mask[tuple(index)] = False
                    index[axis] = -1
                    mask[tuple(index)] = False
            return mask
        radial = np.linalg.norm(self.coordinates() - np.array(self.center), axis=-1)
        return radial < self.radius * (1.0 - 1e-12)

    def ring_mask(self) -> np.ndarray:
        """Disk samples outside the domain that touch an interior sample (3^n stencil)."""
        interior = self.interior_mask()
        if self.kind is not DomainKind.DISK:
            return np.zeros(self.shape, dtype=bool)
        padded = np.pad(interior, 1, mode="constant")
        touched = np.zeros_like(interior)
        for offset in itertools.product((-1, 0, 1), repeat=self.dimension):
            index = tuple(slice(1 + o, 1 + o + s) for o, s in zip(offset, self.shape))
            touched |= padded[index]
        return touched & ~interior

    def sample_mask(self) -> np.ndarray:
        """Samples belonging to the closed domain (interior plus boundary samples)."""
        if self.kind is DomainKind.DISK:
            return self.interior_mask() | self.ring_mask()
        return np.ones(self.shape, dtype=bool)

    def contains(self, x: Sequence[float]) -> bool:
        """Whether x lies in the open domain (always true on a periodic cell)."""
        point = np.asarray(x, dtype=float)
        if self.is_periodic:
            return True
        if self.kind is DomainKind.RECTANGLE:
            inside = np.all(point > np.array(self.lower)) and np.all(point < np.array(self.upper))
            return bool(inside)
        return bool(np.linalg.norm(point - np.array(self.center)) < self.radius)

    def describe(self) -> str:
        res = "x".join(str(r) for r in self.resolution)
        return f"{self.kind.value}[{res}]/{self.boundary.value}"

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value, "boundary": self.boundary.value}
        if self.is_periodic:
            assert self.lattice is not None
            data.update(self.lattice.to_dict())
        elif self.kind is DomainKind.RECTANGLE:
            data.update(
                lower=list(self.lower), upper=list(self.upper), resolution=list(self.resolution)
            )
        else:
            data.update(center=list(self.center), radius=self.radius, resolution=self.resolution[0])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DomainSpec":
        kind = DomainKind(data["kind"])
        if kind is DomainKind.PERIODIC_CELL:
            return cls.periodic(data["generators"], data["resolution"])
        boundary = BoundaryCondition(data.get("boundary", BoundaryCondition.DIRICHLET))
        if kind is DomainKind.RECTANGLE:
            return cls.rectangle(data["lower"], data["upper"], data["resolution"], boundary)
        return cls.disk(data["center"], data["radius"], data["resolution"], boundary)


@dataclass
class GridFunction:
    """Sampled scalar field u(., t) on a domain."""

    domain: DomainSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.array(self.values, dtype=float)
        self.time = float(self.time)
        if self.values.shape != self.domain.shape:
            raise DomainError(
                f"values of shape {self.values.shape} do not match grid shape {self.domain.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("grid function values must be finite")
        if self.time < 0.0:
            raise DomainError("time stamp must be non-negative")
        if self.domain.boundary is BoundaryCondition.DIRICHLET:
            boundary = ~self.domain.interior_mask()
            if np.any(self.values[boundary] != 0.0):
                raise DomainError("Dirichlet boundary samples must equal 0")

    def with_values(self, values: np.ndarray, time: Optional[float] = None) -> "GridFunction":
        return GridFunction(self.domain, values, self.time if time is None else time)

    def scaled(self, factor: float) -> "GridFunction":
        return GridFunction(self.domain, self.values * factor, self.time)

    def sample_values(self) -> np.ndarray:
        return self.values[self.domain.sample_mask()]
