"""Evolution run state and per-checkpoint diagnostics."""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..core.exceptions import ConfigurationError
from .coefficients import CoefficientModel
from .grid import DomainSpec, GridFunction

DEFAULT_CFL_SAFETY = 0.4
DEFAULT_REFRESH_INTERVAL = 16


@dataclass(frozen=True)
class CheckpointDiagnostics:
    """Statistics recorded when the run passes a checkpoint time."""

    time: float
    max_gradient: float
    oscillation: float
    energy: float
    minimum: float
    maximum: float
    steps: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvolutionRun:
    """Explicit time integration of u_t = a^{ij}(Du, t) D_i D_j u + b(Du, t) on one domain.

    ``state`` is the current grid function; ``snapshots`` and ``diagnostics`` are filled in
    checkpoint order by the evolution service.
    """

    model: CoefficientModel
    domain: DomainSpec
    state: GridFunction
    cfl_safety: float = DEFAULT_CFL_SAFETY
    checkpoints: List[float] = field(default_factory=list)
    refresh_interval: int = DEFAULT_REFRESH_INTERVAL
    exclude_boundary_layer: bool = True
    max_steps: Optional[int] = None
    label: str = "run"
    snapshots: List[GridFunction] = field(default_factory=list)
    diagnostics: List[CheckpointDiagnostics] = field(default_factory=list)
    initial: Optional[GridFunction] = None
    steps: int = 0
    dt: Optional[float] = None
    lambda_obs: Optional[float] = None
    dt_history: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ConfigurationError(f"CFL safety factor must lie in (0, 1], got {self.cfl_safety}")
        if self.refresh_interval < 1:
            raise ConfigurationError("dt refresh interval must be at least 1")
        if self.state.domain != self.domain:
            raise ConfigurationError("state lives on a different domain than the run")
        if self.model.dimension != self.domain.dimension:
            raise ConfigurationError(
                f"dimension mismatch: model {self.model.dimension}, domain {self.domain.dimension}"
            )
        times = [float(t) for t in self.checkpoints]
        if any(t < 0.0 for t in times) or times != sorted(times):
            raise ConfigurationError("checkpoint times must be non-negative and sorted")
        self.checkpoints = times
        if self.initial is None:
            self.initial = self.state

    @property
    def time(self) -> float:
        return self.state.time

    @property
    def pending_checkpoints(self) -> List[float]:
        recorded = len(self.snapshots)
        return self.checkpoints[recorded:]

    def oscillation_monotone(self, tolerance: float = 1e-10) -> bool:
        """Discrete maximum principle read off the recorded diagnostics."""
        values = [d.oscillation for d in self.diagnostics]
        return all(b <= a + tolerance for a, b in zip(values, values[1:]))

    def extremes_monotone(self, tolerance: float = 1e-10) -> bool:
        minima = [d.minimum for d in self.diagnostics]
        maxima = [d.maximum for d in self.diagnostics]
        return all(b >= a - tolerance for a, b in zip(minima, minima[1:])) and all(
            b <= a + tolerance for a, b in zip(maxima, maxima[1:])
        )

    def snapshot_at(self, time: float) -> GridFunction:
        for snapshot in self.snapshots:
            if np.isclose(snapshot.time, time, rtol=1e-12, atol=1e-15):
                return snapshot
        raise KeyError(f"no snapshot recorded at t={time}")

    def summary(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "model": self.model.describe(),
            "domain": self.domain.to_dict(),
            "cfl_safety": self.cfl_safety,
            "refresh_interval": self.refresh_interval,
            "steps": self.steps,
            "final_time": self.time,
            "dt_min": min(self.dt_history) if self.dt_history else None,
            "dt_max": max(self.dt_history) if self.dt_history else None,
            "checkpoints": [d.to_dict() for d in self.diagnostics],
            "oscillation_monotone": self.oscillation_monotone(),
            "extremes_monotone": self.extremes_monotone(),
        }
