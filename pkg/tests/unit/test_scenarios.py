"""Tests for the scenario schema, repository and runner."""

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from gradflow_lab.core.exceptions import ConfigurationError
from gradflow_lab.models.report import ReportEntry, VerificationReport
from gradflow_lab.models.run import EvolutionRun
from gradflow_lab.models.scenario import Scenario, ScenarioRepository, load_scenario
from gradflow_lab.services.evolution_service import run_to, sine_wave
from gradflow_lab.services.scenario_service import (
    EXIT_CHECK_FAILED,
    EXIT_ERROR,
    EXIT_PASS,
    ScenarioOutcome,
    aggregate_exit_code,
    checkpoint_times,
    emit_csv,
    sweep_table,
)

BUNDLED = Path(__file__).parent.parent.parent / "assets" / "scenarios"


class TestScenarioSchema:
    """Tests for scenario validation."""

    def test_valid_scenario(self, small_scenario_data):
        scenario = Scenario.model_validate(small_scenario_data)
        assert scenario.name == "small_mcf"
        assert [c.kind for c in scenario.checks] == ["gradient_bound", "modulus"]

    def test_unknown_keys_are_rejected(self, small_scenario_data):
        with pytest.raises(ValidationError):
            Scenario.model_validate(dict(small_scenario_data, colour="blue"))
        data = json.loads(json.dumps(small_scenario_data))
        data["model"]["viscosity"] = 1.0
        with pytest.raises(ValidationError):
            Scenario.model_validate(data)

    def test_boundary_estimate_needs_dirichlet(self, small_scenario_data):
        data = dict(small_scenario_data, checks=[{"kind": "boundary_estimate"}])
        with pytest.raises(ValidationError):
            Scenario.model_validate(data)

    def test_dimension_mismatch(self, small_scenario_data):
        data = dict(small_scenario_data, model={"kind": "mcf", "dimension": 2})
        with pytest.raises(ValidationError):
            Scenario.model_validate(data)

    def test_invalid_name(self, small_scenario_data):
        with pytest.raises(ValidationError):
            Scenario.model_validate(dict(small_scenario_data, name="Small MCF"))

    def test_plaplacian_needs_exponent(self, small_scenario_data):
        data = dict(small_scenario_data, model={"kind": "plaplacian", "dimension": 1, "p": 1.0})
        with pytest.raises(ValidationError):
            Scenario.model_validate(data)

    def test_with_overrides(self, small_scenario_data):
        """Test dotted-path overrides, including list indices."""
        scenario = Scenario.model_validate(small_scenario_data)
        variant = scenario.with_overrides(
            {"initial.amplitude": 0.25, "checks.1.eps": 0.01, "name": "small_mcf_variant"}
        )
        assert variant.initial.amplitude == 0.25
        assert variant.checks[1].eps == 0.01
        assert scenario.initial.amplitude == 0.5

    def test_geometric_checkpoints_merge(self, small_scenario_data):
        data = json.loads(json.dumps(small_scenario_data))
        data["evolution"]["geometric"] = {"start": 0.001, "stop": 0.01, "count": 2}
        times = checkpoint_times(Scenario.model_validate(data))
        assert times == [0.0, 0.001, 0.01, 0.02]

    def test_checkpoint_beyond_end(self, small_scenario_data):
        data = json.loads(json.dumps(small_scenario_data))
        data["evolution"]["checkpoints"] = [0.0, 0.5]
        with pytest.raises(ConfigurationError):
            checkpoint_times(Scenario.model_validate(data))

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_scenario(path)


class TestScenarioRepository:
    """Tests for ScenarioRepository."""

    def test_invalid_files_are_recorded(self, scenario_dir):
        repository = ScenarioRepository(scenario_dir)
        assert repository.get_scenario_names() == ["small_mcf"]
        assert "broken.json" in repository.invalid

    def test_missing_directory_is_empty(self, tmp_path):
        repository = ScenarioRepository(tmp_path / "nowhere")
        assert repository.get_all_scenarios() == []

    def test_bundled_scenarios_load(self):
        """Test that every bundled scenario validates."""
        repository = ScenarioRepository(BUNDLED)
        assert repository.invalid == {}
        assert len(repository.get_scenario_names()) == len(list(BUNDLED.glob("*.json")))
        assert "mcf_periodic_interior_bound" in repository.get_scenario_names()


class TestScenarioService:
    """Tests for ScenarioService."""

    def test_list_scenarios(self, scenario_service):
        listing = scenario_service.list_scenarios()
        assert [entry["name"] for entry in listing] == ["small_mcf"]
        assert listing[0]["checks"] == ["gradient_bound", "modulus"]

    def test_unknown_scenario_is_an_error(self, scenario_service, tmp_path):
        outcome = scenario_service.run_scenario("does_not_exist", out=tmp_path)
        assert outcome.exit_code == EXIT_ERROR
        assert "does_not_exist" in outcome.error
        assert outcome.status() == "ERROR"

    def test_invalid_file_is_an_error(self, scenario_service, scenario_dir, tmp_path):
        outcome = scenario_service.run_scenario(scenario_dir / "broken.json", out=tmp_path)
        assert outcome.exit_code == EXIT_ERROR
        assert outcome.error.startswith("invalid scenario")

    def test_run_writes_artifacts(self, scenario_service, tmp_path):
        """Test exit status, report contents and snapshot row counts of a passing run."""
        outcome = scenario_service.run_scenario("small_mcf", out=tmp_path)
        assert outcome.exit_code == EXIT_PASS
        directory = tmp_path / "small_mcf"
        assert outcome.artifact_dir == directory
        for name in ("reports.json", "diagnostics.json", "summary.txt", "barrier.csv"):
            assert (directory / name).is_file()

        snapshots = sorted((directory / "snapshots").glob("checkpoint_*.csv"))
        assert len(snapshots) == 3
        data_rows = sum(len(path.read_text().splitlines()) - 2 for path in snapshots)
        assert data_rows == 3 * 32

        reports = json.loads((directory / "reports.json").read_text())
        assert reports["pass"] is True
        assert [r["name"] for r in reports["reports"]] == ["gradient_bound:mcf", "modulus"]
        assert (directory / "summary.txt").read_text().startswith("scenario small_mcf: PASS")

    def test_run_is_deterministic(self, scenario_service, tmp_path):
        scenario_service.run_scenario("small_mcf", out=tmp_path / "a")
        scenario_service.run_scenario("small_mcf", out=tmp_path / "b")
        first = (tmp_path / "a" / "small_mcf" / "reports.json").read_bytes()
        second = (tmp_path / "b" / "small_mcf" / "reports.json").read_bytes()
        assert first == second

    def test_negative_control_fails(self, scenario_service, small_scenario_data, tmp_path):
        """Test that a planted tenfold violation of the modulus gives exit status 2."""
        data = dict(small_scenario_data, negative_control={"scale": 10, "checks": ["modulus"]})
        outcome = scenario_service.run_scenario(Scenario.model_validate(data), out=tmp_path)
        assert outcome.exit_code == EXIT_CHECK_FAILED
        by_name = {report.name: report for report in outcome.reports}
        assert not by_name["modulus"].passed
        assert by_name["gradient_bound:mcf"].params["scale"] == 1.0

    def test_seed_override(self, scenario_service, tmp_path):
        scenario_service.run_scenario("small_mcf", out=tmp_path, seed=7)
        reports = json.loads((tmp_path / "small_mcf" / "reports.json").read_text())
        assert reports["seed"] == 7

    def test_default_output_root(self, scenario_service, test_settings):
        outcome = scenario_service.run_scenario("small_mcf")
        assert outcome.artifact_dir == Path(test_settings.output_root) / "small_mcf"

    def test_emit_csv(self, periodic_1d, heat_1d, tmp_path):
        run = EvolutionRun(heat_1d, periodic_1d, sine_wave(periodic_1d), checkpoints=[0.0, 0.001])
        rows = emit_csv(run_to(run, 0.001), tmp_path / "snapshots")
        assert rows == 2 * 32
        first = (tmp_path / "snapshots" / "checkpoint_000.csv").read_text().splitlines()
        assert first[0].startswith("# t=0")


class TestSweep:
    """Tests for parameter sweeps."""

    @pytest.mark.asyncio
    async def test_variant_names(self, scenario_service, mocker, tmp_path):
        """Test that each variant is named after its overrides and run once."""
        run = mocker.patch.object(
            scenario_service,
            "run_scenario",
            side_effect=lambda variant, out, seed: ScenarioOutcome(variant.name, EXIT_PASS),
        )
        outcomes = await scenario_service.sweep(
            "small_mcf", {"initial.amplitude": [0.25, 0.5]}, out=tmp_path
        )
        assert [o.name for o in outcomes] == [
            "small_mcf__amplitude=0.25",
            "small_mcf__amplitude=0.5",
        ]
        assert run.call_count == 2
        assert outcomes[0].params["initial.amplitude"] == 0.25

    @pytest.mark.asyncio
    async def test_invalid_variant_is_an_error(self, scenario_service, tmp_path):
        outcomes = await scenario_service.sweep("small_mcf", {"model.dimension": [5]}, out=tmp_path)
        assert outcomes[0].exit_code == EXIT_ERROR
        assert aggregate_exit_code(outcomes) == EXIT_ERROR

    @pytest.mark.integration
    @pytest.mark.asyncio
    async def test_real_sweep_writes_each_variant(self, scenario_service, tmp_path):
        outcomes = await scenario_service.sweep(
            "small_mcf", {"initial.amplitude": [0.25, 0.5]}, out=tmp_path, workers=2
        )
        assert aggregate_exit_code(outcomes) == EXIT_PASS
        for outcome in outcomes:
            assert (tmp_path / outcome.name / "reports.json").is_file()


class TestSweepSummary:
    """Tests for sweep aggregation."""

    def test_aggregate_exit_code(self):
        passing = ScenarioOutcome("a", EXIT_PASS)
        failing = ScenarioOutcome("b", EXIT_CHECK_FAILED)
        broken = ScenarioOutcome("c", EXIT_ERROR)
        assert aggregate_exit_code([passing]) == EXIT_PASS
        assert aggregate_exit_code([passing, failing]) == EXIT_CHECK_FAILED
        assert aggregate_exit_code([failing, broken]) == EXIT_ERROR

    def test_sweep_table(self):
        report = VerificationReport("modulus", [ReportEntry(-0.5, 0.1, time=0.1)])
        table = sweep_table([ScenarioOutcome("a", EXIT_PASS, reports=[report])])
        lines = table.splitlines()
        assert lines[0].split() == ["variant", "status", "worst", "margin", "-", "tol"]
        assert lines[2].split() == ["a", "PASS", "-0.6"]
