"""Command handlers for the gradflow-lab command line."""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..config.logging_config import get_logger
from ..config.settings import Settings
from ..core.exceptions import ConfigurationError
from ..models.grid import DomainSpec
from ..models.scenario import BarrierBlock, ModelBlock
from ..services.anisotropy_service import build_anisotropy
from ..services.barrier_service import export_csv, profile_summary
from ..services.scenario_service import (
    EXIT_CHECK_FAILED,
    EXIT_ERROR,
    EXIT_PASS,
    ScenarioService,
    aggregate_exit_code,
    build_barrier,
    build_model,
    sweep_table,
)
from ..services.verification_service import aniso_diagnostics, barrier_residual_check
from ..utils.helpers import json_ready

logger = get_logger(__name__)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_sweep_params(items: Optional[List[str]]) -> Dict[str, List[Any]]:
    """``dotted.path=v1,v2`` items into a grid of JSON-parsed values.

    Raises:
        ConfigurationError: an item without ``=`` or without values
    """
    grid: Dict[str, List[Any]] = {}
    for item in items or []:
        path, sep, values = item.partition("=")
        if not sep or not path or not values:
            raise ConfigurationError(f"sweep parameter '{item}' is not of the form path=v1,v2")
        grid[path.strip()] = [_parse_value(v.strip()) for v in values.split(",")]
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradflow-lab",
        description="Verify gradient estimates and modulus bounds for quasilinear gradient flows.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Artifact root (default: $GRADFLOW_OUTPUT_ROOT or runs/)")
    common.add_argument("--workers", type=int, help="Concurrent scenarios in a sweep")
    common.add_argument("--seed", type=int, help="Seed for sampled diagnostics")
    common.add_argument("--tolerance-scale", type=float, help="Multiplier of the h^2 tolerance")
    common.add_argument("--log-level", help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Run one scenario and write its artifacts")
    run.add_argument("--config", required=True, help="Scenario file or bundled scenario name")

    sub.add_parser("list", parents=[common], help="List bundled scenarios")

    barrier = sub.add_parser(
        "barrier", parents=[common], help="Build a barrier profile and export its residual table"
    )
    barrier.add_argument(
        "--family",
        required=True,
        choices=["csf", "plaplacian", "curvature", "translator", "radial"],
    )
    barrier.add_argument("--p", type=float)
    barrier.add_argument("--amplitude", type=float, default=1.0)
    barrier.add_argument("--length", type=float, default=1.0)
    barrier.add_argument("--t-max", type=float, default=1.0)
    barrier.add_argument("--a", type=float, default=1.0)
    barrier.add_argument("--forcing", type=float, default=0.0)
    barrier.add_argument("--speed", type=float, default=1.0)
    barrier.add_argument("--z-max", type=float)
    barrier.add_argument("--dimension", type=int, default=2)

    aniso = sub.add_parser(
        "aniso-check", parents=[common], help="Homogeneity, sphere constants and duality"
    )
    aniso.add_argument("--norm", default="euclidean", choices=["euclidean", "ellipsoid", "quartic"])
    aniso.add_argument("--q", help="Ellipsoid matrix as JSON, e.g. [[4,0,0],[0,1,0],[0,0,1]]")
    aniso.add_argument("--epsilon", type=float, default=0.3)
    aniso.add_argument("--mobility", default="constant", choices=["constant", "tilted"])
    aniso.add_argument("--delta", type=float, default=0.0)
    aniso.add_argument("--dimension", type=int, default=2)
    aniso.add_argument("--samples", type=int, default=10_000)

    sweep = sub.add_parser("sweep", parents=[common], help="Run a parameter grid over one scenario")
    sweep.add_argument("--config", required=True, help="Scenario file or bundled scenario name")
    sweep.add_argument(
        "--param",
        action="append",
        metavar="PATH=V1,V2",
        help="Dotted scenario path and values, e.g. model.p=1.5,2,3 (repeatable)",
    )
    return parser


class CommandHandler:
    """Handler for command-line subcommands; every handler returns an exit code."""

    def __init__(self, settings: Settings, scenario_service: Optional[ScenarioService] = None):
        """Initialize command handler.

        Args:
            settings: Settings after command-line overrides
            scenario_service: Scenario service instance
        """
        self.settings = settings
        self.scenario_service = scenario_service or ScenarioService(settings)

    async def dispatch(self, args: argparse.Namespace) -> int:
        handlers = {
            "run": self.run_command,
            "list": self.list_command,
            "barrier": self.barrier_command,
            "aniso-check": self.aniso_command,
            "sweep": self.sweep_command,
        }
        return await handlers[args.command](args)

    async def run_command(self, args: argparse.Namespace) -> int:
        outcome = self.scenario_service.run_scenario(args.config, args.out, args.seed)
        for report in outcome.reports:
            print(report.table())
            print()
        if outcome.error:
            print(f"error: {outcome.error}")
        print(f"{outcome.name}: {outcome.status()} (artifacts: {outcome.artifact_dir or '-'})")
        return outcome.exit_code

    async def list_command(self, args: argparse.Namespace) -> int:
        listing = self.scenario_service.list_scenarios()
        for entry in listing:
            print(f"{entry['name']:<40} {entry['result']}")
        for name, reason in sorted(self.scenario_service.repository.invalid.items()):
            print(f"{name:<40} INVALID: {reason}")
        if not listing:
            logger.info(f"no scenarios in {self.scenario_service.scenario_dir}")
        return EXIT_PASS

    async def barrier_command(self, args: argparse.Namespace) -> int:
        block = BarrierBlock(
            family=args.family,
            amplitude=args.amplitude,
            length=args.length,
            t_max=args.t_max,
            p=args.p,
            a=args.a,
            forcing=args.forcing,
            speed=args.speed,
            z_max=args.z_max,
            dimension=args.dimension,
        )
        model_kind = "plaplacian" if args.family == "plaplacian" else "mcf"
        model = build_model(ModelBlock(kind=model_kind, dimension=1, p=args.p or 2.0))
        domain = DomainSpec.unit_periodic(1, 8)
        profile = build_barrier(block, model, domain, None, args.t_max)
        assert profile is not None

        root = Path(args.out or self.settings.output_root) / "barriers"
        stem = profile.label.replace(" ", "_").replace("/", "_")
        export_csv(profile, root / f"{stem}.csv")
        report = barrier_residual_check(profile)
        (root / f"{stem}.json").write_text(
            json.dumps(
                json_ready({"profile": profile_summary(profile), "report": report.to_dict()}),
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        print(report.table())
        return EXIT_PASS if report.passed else EXIT_CHECK_FAILED

    async def aniso_command(self, args: argparse.Namespace) -> int:
        q = json.loads(args.q) if args.q else None
        model = build_anisotropy(
            args.norm, args.dimension, q, args.epsilon, args.mobility, args.delta
        )
        report = aniso_diagnostics(model, args.seed or self.settings.seed, args.samples)
        print(report.table())
        print(json.dumps(json_ready(report.params.get("constants", {})), sort_keys=True))
        return EXIT_PASS if report.passed else EXIT_CHECK_FAILED

    async def sweep_command(self, args: argparse.Namespace) -> int:
        grid = parse_sweep_params(args.param)
        outcomes = await self.scenario_service.sweep(
            args.config, grid, args.out, args.workers, args.seed
        )
        if not outcomes:
            return EXIT_ERROR
        print(sweep_table(outcomes))
        return aggregate_exit_code(outcomes)
