"""Scenario configuration schema and repository."""

import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..config.logging_config import get_logger
from ..core.exceptions import ConfigurationError
from ..utils.validators import validate_exponent, validate_scenario_name

logger = get_logger(__name__)

SCHEMA_VERSION = 1


class _Block(BaseModel):
    """Base for every scenario block: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class ScalarFunctionBlock(_Block):
    form: Literal["constant", "power", "curvature"] = "constant"
    coefficient: float = 1.0
    exponent: float = 0.0


class AnisotropyBlock(_Block):
    norm: Literal["euclidean", "ellipsoid", "quartic"] = "euclidean"
    q: Optional[List[List[float]]] = None
    epsilon: float = 0.3
    mobility: Literal["constant", "tilted"] = "constant"
    delta: float = 0.0


class ModelBlock(_Block):
    """Coefficient model of u_t = a^{ij}(Du) D_i D_j u + b(Du)."""

    kind: Literal["mcf", "plaplacian", "isotropic", "anisotropic", "custom"]
    dimension: int = Field(..., ge=1, le=3)
    p: Optional[float] = None
    epsilon: Optional[float] = None
    alpha: Optional[ScalarFunctionBlock] = None
    beta: Optional[ScalarFunctionBlock] = None
    anisotropy: Optional[AnisotropyBlock] = None
    matrix: Optional[List[List[float]]] = None
    drift: float = 0.0

    @model_validator(mode="after")
    def _kind_parameters(self) -> "ModelBlock":
        if self.kind == "plaplacian" and not validate_exponent(self.p):
            raise ValueError("plaplacian model needs an exponent p > 1")
        if self.kind == "isotropic" and (self.alpha is None or self.beta is None):
            raise ValueError("isotropic model needs alpha and beta")
        if self.kind == "custom" and self.matrix is None:
            raise ValueError("custom model needs a constant matrix")
        return self


class DomainBlock(_Block):
    kind: Literal["periodic", "rectangle", "disk"]
    boundary: Literal["periodic", "neumann", "dirichlet"] = "periodic"
    resolution: List[int] = Field(..., min_length=1, max_length=3)
    generators: Optional[List[List[float]]] = None
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = None

    @model_validator(mode="after")
    def _geometry(self) -> "DomainBlock":
        if (self.kind == "periodic") != (self.boundary == "periodic"):
            raise ValueError("periodic boundary tag goes with periodic cells only")
        if self.kind == "rectangle" and (self.lower is None or self.upper is None):
            raise ValueError("rectangle needs lower and upper corners")
        if self.kind == "disk" and (self.center is None or self.radius is None):
            raise ValueError("disk needs center and radius")
        return self

    @property
    def dimension(self) -> int:
        if self.kind == "disk" and self.center is not None:
            return len(self.center)
        return len(self.resolution)


class InitialBlock(_Block):
    recipe: Literal["square_wave", "product_sines", "sine_wave", "radial_cap", "cone", "file"]
    amplitude: float = 1.0
    axis: int = 0
    mode: int = 1
    modes: Optional[List[int]] = None
    width: Optional[float] = None
    center: Optional[List[float]] = None
    slope: float = 1.0
    path: Optional[str] = None
    mollify: Optional[float] = Field(None, gt=0.0, description="Bump mollifier radius")

    @model_validator(mode="after")
    def _recipe_parameters(self) -> "InitialBlock":
        if self.recipe == "file" and not self.path:
            raise ValueError("file recipe needs a path")
        if self.recipe == "cone" and self.center is None:
            raise ValueError("cone recipe needs a center")
        return self


class BarrierBlock(_Block):
    """Barrier family; amplitude defaults to the measured oscillation of the initial data."""

    family: Literal["none", "csf", "plaplacian", "curvature", "dirichlet", "translator", "radial"]
    amplitude: Optional[float] = Field(None, gt=0.0)
    length: Optional[float] = Field(None, gt=0.0)
    t_max: Optional[float] = Field(None, gt=0.0)
    p: Optional[float] = None
    a: float = Field(1.0, gt=0.0, description="Ellipticity constant A of alpha(s) = A / (1 + s^2)")
    forcing: float = 0.0
    speed: float = 1.0
    z_max: Optional[float] = None
    dimension: Optional[int] = None
    export: bool = Field(True, description="Write the residual table next to the reports")


class ModulusCheck(_Block):
    kind: Literal["modulus"]
    eps: float = Field(0.0, ge=0.0)


class GradientBoundCheck(_Block):
    kind: Literal["gradient_bound"]
    curve: Literal[
        "mcf", "anisotropic_periodic", "ellipticity", "plaplacian", "anisotropic_dirichlet"
    ]
    params: Dict[str, float] = Field(default_factory=dict)
    t_min: float = Field(0.0, ge=0.0)


class BoundaryEstimateCheck(_Block):
    kind: Literal["boundary_estimate"]
    anisotropic: bool = False


class AnisoDiagnosticsCheck(_Block):
    kind: Literal["aniso_diagnostics"]
    samples: int = Field(10_000, ge=1)


class BarrierResidualCheck(_Block):
    kind: Literal["barrier_residual"]


Check = Annotated[
    Union[
        ModulusCheck,
        GradientBoundCheck,
        BoundaryEstimateCheck,
        AnisoDiagnosticsCheck,
        BarrierResidualCheck,
    ],
    Field(discriminator="kind"),
]


class GeometricSchedule(_Block):
    start: float = Field(..., gt=0.0)
    stop: float = Field(..., gt=0.0)
    count: int = Field(..., ge=1)


class EvolutionBlock(_Block):
    t_end: float = Field(..., gt=0.0)
    checkpoints: List[float] = Field(default_factory=list)
    geometric: Optional[GeometricSchedule] = None
    cfl_safety: Optional[float] = Field(None, gt=0.0, le=1.0)
    refresh_interval: Optional[int] = Field(None, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)

    @field_validator("checkpoints")
    @classmethod
    def _sorted(cls, value: List[float]) -> List[float]:
        if any(t < 0.0 for t in value) or value != sorted(value):
            raise ValueError("checkpoints must be non-negative and sorted")
        return value


class NegativeControlBlock(_Block):
    """Planted violation: measured fields are multiplied by ``scale`` before checking."""

    scale: float = Field(..., gt=0.0)
    checks: Optional[List[str]] = None


class Scenario(_Block):
    """One verification scenario: model, domain, data, barrier, checks and schedule."""

    schema_version: Literal[1] = SCHEMA_VERSION
    name: str
    result: str = Field("", description="Estimate the scenario exercises")
    model: ModelBlock
    domain: DomainBlock
    initial: Optional[InitialBlock] = None
    barrier: BarrierBlock = BarrierBlock(family="none")
    checks: List[Check] = Field(default_factory=list)
    evolution: Optional[EvolutionBlock] = None
    output: Optional[str] = None
    seed: int = 0
    negative_control: Optional[NegativeControlBlock] = None

    @field_validator("name")
    @classmethod
    def _valid_name(cls, value: str) -> str:
        if not validate_scenario_name(value):
            raise ValueError(f"invalid scenario name '{value}'")
        return value

    @model_validator(mode="after")
    def _compatible_blocks(self) -> "Scenario":
        if self.model.dimension != self.domain.dimension:
            raise ValueError(
                f"dimension mismatch: model {self.model.dimension}, domain {self.domain.dimension}"
            )
        kinds = {check.kind for check in self.checks}
        if "boundary_estimate" in kinds and self.domain.boundary != "dirichlet":
            raise ValueError("boundary_estimate check requires a Dirichlet domain")
        if "aniso_diagnostics" in kinds and self.model.kind != "anisotropic":
            raise ValueError("aniso_diagnostics check requires an anisotropic model")
        if kinds & {"modulus", "barrier_residual"} and self.barrier.family == "none":
            raise ValueError("modulus and barrier_residual checks need a barrier block")
        needs_run = kinds & {"modulus", "gradient_bound", "boundary_estimate"}
        if needs_run and (self.evolution is None or self.initial is None):
            raise ValueError("evolution checks need initial and evolution blocks")
        if self.negative_control and self.negative_control.checks:
            unknown = set(self.negative_control.checks) - kinds
            if unknown:
                raise ValueError(f"negative control names unknown checks {sorted(unknown)}")
        return self

    def with_overrides(self, overrides: Dict[str, Any]) -> "Scenario":
        """Copy with dotted-path overrides, e.g. ``{"model.p": 3.0}``; revalidated."""
        data = self.model_dump(mode="json", exclude_none=True)
        for path, value in overrides.items():
            node = data
            keys = path.split(".")
            for key in keys[:-1]:
                if isinstance(node, list):
                    node = node[int(key)]
                else:
                    node = node.setdefault(key, {})
            if isinstance(node, list):
                node[int(keys[-1])] = value
            else:
                node[keys[-1]] = value
        return Scenario.model_validate(data)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Parse and validate one scenario file.

    Raises:
        ConfigurationError: unreadable JSON
        pydantic.ValidationError: schema violations
    """
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{source}: not valid JSON ({e})") from e
    return Scenario.model_validate(data)


class ScenarioRepository:
    """Repository of scenario files in one directory."""

    def __init__(self, scenario_dir: Optional[Union[str, Path]] = None):
        """Initialize scenario repository.

        Args:
            scenario_dir: Directory holding ``*.json`` scenario files
        """
        self._scenarios: Dict[str, Scenario] = {}
        self._paths: Dict[str, Path] = {}
        self.invalid: Dict[str, str] = {}
        if scenario_dir is not None:
            self.load_from_dir(scenario_dir)

    def get_scenario(self, name: str) -> Optional[Scenario]:
        return self._scenarios.get(name)

    def get_path(self, name: str) -> Optional[Path]:
        return self._paths.get(name)

    def get_all_scenarios(self) -> List[Scenario]:
        return [self._scenarios[name] for name in self.get_scenario_names()]

    def get_scenario_names(self) -> List[str]:
        return sorted(self._scenarios)

    def add_scenario(self, scenario: Scenario, path: Optional[Path] = None) -> None:
        self._scenarios[scenario.name] = scenario
        if path is not None:
            self._paths[scenario.name] = path

    def load_from_dir(self, scenario_dir: Union[str, Path]) -> None:
        """Load every scenario file; invalid files are recorded, not raised.

        Args:
            scenario_dir: Directory to scan (a missing directory is an empty listing)
        """
        directory = Path(scenario_dir)
        if not directory.is_dir():
            logger.warning(f"scenario directory {directory} not found")
            return
        for path in sorted(directory.glob("*.json")):
            try:
                self.add_scenario(load_scenario(path), path)
            except (ConfigurationError, ValidationError) as e:
                self.invalid[path.name] = str(e).splitlines()[0]
                logger.warning(f"skipping invalid scenario {path.name}: {self.invalid[path.name]}")
