"""Scenario runner: builds runs and barriers from configuration, runs checks, writes artifacts."""

import asyncio
import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from ..config.logging_config import get_logger
from ..config.settings import Settings, get_settings
from ..core.exceptions import ConfigurationError, GradflowError
from ..models.anisotropy import AnisotropyModel, BoundaryGeometry
from ..models.barrier import BarrierProfile
from ..models.coefficients import (
    AnisotropicModel,
    CoefficientModel,
    CustomModel,
    IsotropicModel,
    MCFModel,
    PLaplacianModel,
    ScalarFunction,
)
from ..models.grid import BoundaryCondition, DomainSpec, GridFunction
from ..models.report import VerificationReport
from ..models.run import EvolutionRun
from ..models.scenario import (
    AnisoDiagnosticsCheck,
    BarrierBlock,
    BarrierResidualCheck,
    BoundaryEstimateCheck,
    Check,
    DomainBlock,
    GradientBoundCheck,
    InitialBlock,
    ModelBlock,
    ModulusCheck,
    Scenario,
    ScenarioRepository,
    load_scenario,
)
from ..utils.helpers import format_table, json_ready
from .anisotropy_service import build_anisotropy, min_unit_covector, sphere_constants
from .barrier_service import (
    anisotropic_alpha,
    csf_profile,
    curvature_profile,
    dirichlet_barrier,
    export_csv,
    plap_barrier,
    profile_summary,
    radial_profile,
    translator_profile,
)
from .coefficient_service import ellipticity_constants
from .evolution_service import (
    cone,
    geometric_checkpoints,
    load_initial,
    make_square_wave,
    mollification_deviation,
    mollify,
    product_sines,
    radial_cap,
    run_to,
    sine_wave,
)
from .grid_service import oscillation, save_csv
from .verification_service import (
    aniso_diagnostics,
    barrier_residual_check,
    boundary_estimate_check,
    gradient_bound_check,
    modulus_check,
    sharpness_summary,
)

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


# Builders


def build_model(block: ModelBlock) -> CoefficientModel:
    n = block.dimension
    if block.kind == "mcf":
        return MCFModel(n)
    if block.kind == "plaplacian":
        assert block.p is not None
        return PLaplacianModel(n, block.p, block.epsilon)
    if block.kind == "isotropic":
        assert block.alpha is not None and block.beta is not None
        return IsotropicModel(
            n, ScalarFunction(**block.alpha.model_dump()), ScalarFunction(**block.beta.model_dump())
        )
    if block.kind == "anisotropic":
        return AnisotropicModel(_anisotropy(block))
    return CustomModel.constant(block.matrix, block.drift)


def _anisotropy(block: ModelBlock) -> AnisotropyModel:
    spec = block.anisotropy
    if spec is None:
        return build_anisotropy("euclidean", block.dimension)
    return build_anisotropy(
        spec.norm, block.dimension, spec.q, spec.epsilon, spec.mobility, spec.delta
    )


def build_domain(block: DomainBlock) -> DomainSpec:
    boundary = BoundaryCondition(block.boundary)
    if block.kind == "periodic":
        generators = block.generators
        if generators is None:
            generators = np.eye(len(block.resolution)).tolist()
        return DomainSpec.periodic(generators, block.resolution)
    if block.kind == "rectangle":
        assert block.lower is not None and block.upper is not None
        return DomainSpec.rectangle(block.lower, block.upper, block.resolution, boundary)
    assert block.center is not None and block.radius is not None
    return DomainSpec.disk(block.center, block.radius, block.resolution[0], boundary)


def build_initial(
    block: InitialBlock, domain: DomainSpec, base_dir: Optional[Path] = None
) -> GridFunction:
    """Initial data from its recipe, optionally mollified."""
    if block.recipe == "square_wave":
        u0 = make_square_wave(domain, block.axis, block.amplitude)
    elif block.recipe == "product_sines":
        u0 = product_sines(domain, block.modes, block.amplitude)
    elif block.recipe == "sine_wave":
        u0 = sine_wave(domain, block.axis, block.mode, block.amplitude)
    elif block.recipe == "radial_cap":
        u0 = radial_cap(domain, block.amplitude, block.width)
    elif block.recipe == "cone":
        assert block.center is not None
        u0 = cone(domain, block.center, block.slope)
    else:
        assert block.path is not None
        path = Path(block.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        u0 = load_initial(path, domain)
    if block.mollify is not None:
        smoothed = mollify(u0, block.mollify)
        logger.debug(f"mollification moved the data by {mollification_deviation(u0, smoothed):.3e}")
        u0 = smoothed
    return u0


def build_barrier(
    block: BarrierBlock,
    model: CoefficientModel,
    domain: DomainSpec,
    u0: Optional[GridFunction],
    t_end: Optional[float],
) -> Optional[BarrierProfile]:
    """Barrier profile for the scenario's checks.

    Modulus barriers cover half the largest pair distance and default to the oscillation of the
    initial data; the Dirichlet barrier covers the largest boundary distance with sup |u0|.
    """
    if block.family == "none":
        return None
    t_max = block.t_max or t_end or 1.0
    measured = oscillation(u0) if u0 is not None else 1.0
    amplitude = block.amplitude or measured

    if block.family == "csf":
        return csf_profile(block.length or 0.5 * domain.max_pair_distance(), t_max, amplitude)
    if block.family == "plaplacian":
        p = block.p or (model.exponent if isinstance(model, PLaplacianModel) else None)
        if p is None:
            raise ConfigurationError("plaplacian barrier needs p")
        return plap_barrier(p, amplitude, block.t_max or np.inf)
    if block.family == "curvature":
        return curvature_profile(
            anisotropic_alpha(block.a, 1.0),
            block.length or 0.5 * domain.max_pair_distance(),
            t_max,
            amplitude,
            block.forcing,
            label="curvature",
        )
    if block.family == "dirichlet":
        sup_abs = block.amplitude or (
            float(np.max(np.abs(u0.sample_values()))) if u0 is not None else 1.0
        )
        constants, s_min, lower = None, None, 0.0
        if isinstance(model, AnisotropicModel):
            constants = sphere_constants(model.anisotropy)
            s_min = min_unit_covector(model.anisotropy)
            lower = BoundaryGeometry(domain, model.anisotropy).lower_curvature_bound()
        return dirichlet_barrier(
            model,
            sup_abs,
            block.length or 0.5 * domain.diameter(),
            t_max,
            constants,
            s_min,
            lower,
        )
    if block.family == "translator":
        return translator_profile(
            anisotropic_alpha(block.a, 1.0), block.speed, block.forcing, block.z_max or 1.0
        )
    return radial_profile(block.dimension or model.dimension, block.z_max or 20.0)


def checkpoint_times(scenario: Scenario) -> List[float]:
    evolution = scenario.evolution
    assert evolution is not None
    times = list(evolution.checkpoints)
    if evolution.geometric is not None:
        g = evolution.geometric
        times = sorted(set(times) | set(geometric_checkpoints(g.start, g.stop, g.count)))
    if times and times[-1] > evolution.t_end:
        raise ConfigurationError(f"checkpoint {times[-1]} lies beyond t_end={evolution.t_end}")
    return times


# Outcome and artifacts


@dataclass
class ScenarioOutcome:
    """Exit status, artifact directory and reports of one scenario run."""

    name: str
    exit_code: int
    artifact_dir: Optional[Path] = None
    reports: List[VerificationReport] = field(default_factory=list)
    error: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.exit_code == EXIT_PASS

    def status(self) -> str:
        return {EXIT_PASS: "PASS", EXIT_CHECK_FAILED: "FAIL"}.get(self.exit_code, "ERROR")


def emit_csv(run: EvolutionRun, directory: Union[str, Path]) -> int:
    """Write one CSV per recorded checkpoint; returns the total number of data rows."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    rows = 0
    for k, snapshot in enumerate(run.snapshots):
        rows += save_csv(snapshot, target / f"checkpoint_{k:03d}.csv")
    logger.debug(f"{run.label}: wrote {len(run.snapshots)} snapshots ({rows} rows) to {target}")
    return rows


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(
        json.dumps(json_ready(payload), sort_keys=True, indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )


def _scaled_for(scenario: Scenario, check: Check) -> float:
    control = scenario.negative_control
    if control is None:
        return 1.0
    if control.checks is None or check.kind in control.checks:
        return control.scale
    return 1.0


class ScenarioService:
    """Service for listing and running verification scenarios."""

    def __init__(self, settings: Optional[Settings] = None, scenario_dir: Optional[str] = None):
        """Initialize the scenario service.

        Args:
            settings: Settings to use (cached defaults when omitted)
            scenario_dir: Directory of scenario files, defaults to ``settings.scenario_dir``
        """
        self.settings = settings or get_settings()
        self.scenario_dir = Path(scenario_dir or self.settings.scenario_dir)
        self.repository = ScenarioRepository(self.scenario_dir)
        logger.info(
            f"Initialized scenario service with {len(self.repository.get_scenario_names())} "
            f"scenarios from {self.scenario_dir}"
        )

    def list_scenarios(self) -> List[Dict[str, Any]]:
        """Name, exercised result, checks and path of every valid scenario (sorted by name)."""
        listing = []
        for scenario in self.repository.get_all_scenarios():
            path = self.repository.get_path(scenario.name)
            listing.append(
                {
                    "name": scenario.name,
                    "result": scenario.result,
                    "checks": [check.kind for check in scenario.checks],
                    "path": str(path) if path else None,
                }
            )
        return listing

    def resolve(self, reference: Union[str, Path, Scenario]) -> Scenario:
        """A scenario object, a file path, or the name of a repository scenario."""
        if isinstance(reference, Scenario):
            return reference
        path = Path(reference)
        if path.suffix == ".json" or path.exists():
            return load_scenario(path)
        scenario = self.repository.get_scenario(str(reference))
        if scenario is None:
            raise ConfigurationError(f"no scenario named '{reference}' in {self.scenario_dir}")
        return scenario

    def run_scenario(
        self,
        reference: Union[str, Path, Scenario],
        out: Optional[Union[str, Path]] = None,
        seed: Optional[int] = None,
    ) -> ScenarioOutcome:
        """Build, evolve, check and write artifacts; errors become exit status 1."""
        name = str(reference.name) if isinstance(reference, Scenario) else str(reference)
        try:
            scenario = self.resolve(reference)
            name = scenario.name
            if seed is not None:
                scenario = scenario.model_copy(update={"seed": seed})
            return self._execute(scenario, out)
        except ValidationError as e:
            message = f"invalid scenario: {e.error_count()} errors; {e.errors()[0]['msg']}"
        except GradflowError as e:
            message = f"{type(e).__name__}: {e}"
        except OSError as e:
            message = f"I/O error: {e}"
        logger.error(f"scenario {name}: {message}")
        return ScenarioOutcome(name, EXIT_ERROR, error=message)

    def _artifact_dir(self, scenario: Scenario, out: Optional[Union[str, Path]]) -> Path:
        root = Path(out) if out is not None else Path(scenario.output or self.settings.output_root)
        return root / scenario.name

    def _execute(self, scenario: Scenario, out: Optional[Union[str, Path]]) -> ScenarioOutcome:
        settings = self.settings
        logger.info(f"running scenario {scenario.name} ({scenario.result or 'no result label'})")
        model = build_model(scenario.model)
        domain = build_domain(scenario.domain)
        u0 = None
        if scenario.initial is not None:
            u0 = build_initial(scenario.initial, domain, self.scenario_dir)
        t_end = scenario.evolution.t_end if scenario.evolution else None
        barrier = build_barrier(scenario.barrier, model, domain, u0, t_end)

        run: Optional[EvolutionRun] = None
        if scenario.evolution is not None and u0 is not None:
            evolution = scenario.evolution
            run = EvolutionRun(
                model,
                domain,
                u0,
                cfl_safety=evolution.cfl_safety or settings.cfl_safety,
                checkpoints=checkpoint_times(scenario),
                refresh_interval=evolution.refresh_interval or settings.dt_refresh_interval,
                max_steps=evolution.max_steps or settings.max_steps,
                label=scenario.name,
            )
            run_to(run, evolution.t_end)

        reports = [self._check(scenario, check, model, run, barrier) for check in scenario.checks]
        directory = self._artifact_dir(scenario, out)
        self._write_artifacts(directory, scenario, run, barrier, reports)

        code = EXIT_PASS if all(report.passed for report in reports) else EXIT_CHECK_FAILED
        outcome = ScenarioOutcome(scenario.name, code, directory, reports)
        logger.info(f"scenario {scenario.name}: {outcome.status()} -> {directory}")
        return outcome

    def _check(
        self,
        scenario: Scenario,
        check: Check,
        model: CoefficientModel,
        run: Optional[EvolutionRun],
        barrier: Optional[BarrierProfile],
    ) -> VerificationReport:
        settings = self.settings
        scale = _scaled_for(scenario, check)
        if isinstance(check, AnisoDiagnosticsCheck):
            assert isinstance(model, AnisotropicModel)
            return aniso_diagnostics(model.anisotropy, scenario.seed, check.samples)
        if isinstance(check, BarrierResidualCheck):
            assert barrier is not None
            return barrier_residual_check(barrier)

        assert run is not None
        if isinstance(check, ModulusCheck):
            assert barrier is not None
            return modulus_check(run, barrier, check.eps, settings, scenario.seed, scale)
        if isinstance(check, GradientBoundCheck):
            params: Dict[str, Any] = {**check.params, "t_min": check.t_min}
            if isinstance(model, PLaplacianModel):
                params.setdefault("p", model.exponent)
            if isinstance(model, AnisotropicModel) and check.curve.startswith("anisotropic"):
                params.setdefault("A", sphere_constants(model.anisotropy).a)
            if check.curve == "ellipticity" and ("A0" not in params or "P" not in params):
                a0, threshold = ellipticity_constants(model, params.get("r_max", 1e3))
                params.setdefault("A0", a0)
                params.setdefault("P", threshold)
            report = gradient_bound_check(run, check.curve, params, settings, scale)
            report.params["sharpness"] = sharpness_summary(report)
            return report
        assert isinstance(check, BoundaryEstimateCheck) and barrier is not None
        anisotropy = None
        if check.anisotropic and isinstance(model, AnisotropicModel):
            anisotropy = model.anisotropy
        return boundary_estimate_check(run, barrier, anisotropy, settings, scale)

    def _write_artifacts(
        self,
        directory: Path,
        scenario: Scenario,
        run: Optional[EvolutionRun],
        barrier: Optional[BarrierProfile],
        reports: List[VerificationReport],
    ) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        if run is not None:
            emit_csv(run, directory / "snapshots")
        if barrier is not None and scenario.barrier.export:
            export_csv(barrier, directory / "barrier.csv")

        _write_json(
            directory / "reports.json",
            {
                "scenario": scenario.name,
                "result": scenario.result,
                "seed": scenario.seed,
                "reports": [report.to_dict() for report in reports],
                "pass": all(report.passed for report in reports),
            },
        )
        _write_json(
            directory / "diagnostics.json",
            {
                "scenario": scenario.model_dump(mode="json", exclude_none=True),
                "run": run.summary() if run is not None else None,
                "barrier": profile_summary(barrier) if barrier is not None else None,
            },
        )
        tables = [report.table() for report in reports]
        status = "PASS" if all(r.passed for r in reports) else "FAIL"
        summary = f"scenario {scenario.name}: {status}\n{scenario.result}\n\n" + "\n\n".join(tables)
        (directory / "summary.txt").write_text(summary + "\n", encoding="utf-8")

    # Sweeps

    async def sweep(
        self,
        reference: Union[str, Path, Scenario],
        grid: Dict[str, Sequence[Any]],
        out: Optional[Union[str, Path]] = None,
        workers: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> List[ScenarioOutcome]:
        """Run the cartesian product of dotted-path overrides, at most ``workers`` at a time.

        Each variant writes to its own directory named after the overrides.
        """
        base = self.resolve(reference)
        limit = asyncio.Semaphore(workers or self.settings.workers)
        keys = sorted(grid)
        variants = []
        for values in itertools.product(*(grid[k] for k in keys)):
            overrides = dict(zip(keys, values))
            suffix = "__".join(f"{k.split('.')[-1]}={v}" for k, v in overrides.items())
            raw = f"{base.name}__{suffix}" if suffix else base.name
            name = re.sub(r"[^a-z0-9_=.-]", "_", raw.lower())
            overrides["name"] = name
            variants.append(overrides)

        async def one(overrides: Dict[str, Any]) -> ScenarioOutcome:
            async with limit:
                try:
                    variant = base.with_overrides(overrides)
                except (ValidationError, GradflowError) as e:
                    logger.error(f"sweep variant {overrides['name']}: {e}")
                    return ScenarioOutcome(
                        overrides["name"], EXIT_ERROR, error=str(e), params=overrides
                    )
                outcome = await asyncio.to_thread(self.run_scenario, variant, out, seed)
                outcome.params = overrides
                return outcome

        outcomes = await asyncio.gather(*(one(v) for v in variants))
        logger.info(f"sweep {base.name}: {len(outcomes)} variants")
        return list(outcomes)


def sweep_table(outcomes: Sequence[ScenarioOutcome]) -> str:
    rows = []
    for outcome in outcomes:
        worst = [r.worst for r in outcome.reports if r.worst is not None]
        margin = max((w.margin - w.tolerance for w in worst), default=float("nan"))
        rows.append([outcome.name, outcome.status(), margin])
    return format_table(rows, ["variant", "status", "worst margin - tol"])


def aggregate_exit_code(outcomes: Sequence[ScenarioOutcome]) -> int:
    """1 if any run errored, else 2 if any check failed, else 0."""
    codes = {outcome.exit_code for outcome in outcomes}
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    if EXIT_CHECK_FAILED in codes:
        return EXIT_CHECK_FAILED
    return EXIT_PASS
