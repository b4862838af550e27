"""Tests for the command-line handlers and application."""

import json

import pytest

from gradflow_lab.core.application import Application
from gradflow_lab.core.exceptions import ConfigurationError
from gradflow_lab.handlers.command_handler import CommandHandler, build_parser, parse_sweep_params
from gradflow_lab.services.scenario_service import ScenarioOutcome


class TestParseSweepParams:
    """Tests for sweep parameter parsing."""

    def test_values_are_json_parsed(self):
        grid = parse_sweep_params(["model.p=1.5,2,3", "initial.recipe=square_wave,sine_wave"])
        assert grid == {
            "model.p": [1.5, 2, 3],
            "initial.recipe": ["square_wave", "sine_wave"],
        }

    def test_empty(self):
        assert parse_sweep_params(None) == {}

    @pytest.mark.parametrize("item", ["model.p", "=1,2", "model.p="])
    def test_malformed_items(self, item):
        with pytest.raises(ConfigurationError):
            parse_sweep_params([item])


class TestParser:
    """Tests for the argument parser."""

    def test_shared_flags_follow_the_subcommand(self):
        args = build_parser().parse_args(
            ["run", "--config", "small_mcf", "--out", "/tmp/x", "--seed", "4"]
            + ["--tolerance-scale", "2"]
        )
        assert args.command == "run"
        assert args.out == "/tmp/x"
        assert args.seed == 4
        assert args.tolerance_scale == 2.0

    def test_sweep_params_repeat(self):
        args = build_parser().parse_args(
            ["sweep", "--config", "a", "--param", "model.p=2,3", "--param", "seed=1"]
        )
        assert args.param == ["model.p=2,3", "seed=1"]

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestCommandHandler:
    """Tests for CommandHandler."""

    @pytest.fixture
    def handler(self, test_settings, scenario_service):
        return CommandHandler(test_settings, scenario_service)

    @pytest.mark.asyncio
    async def test_list_reports_invalid_files(self, handler, capsys):
        args = build_parser().parse_args(["list"])
        assert await handler.dispatch(args) == 0
        output = capsys.readouterr().out
        assert "small_mcf" in output
        assert "broken.json" in output and "INVALID" in output

    @pytest.mark.asyncio
    async def test_run_prints_status(self, handler, tmp_path, capsys):
        args = build_parser().parse_args(["run", "--config", "small_mcf", "--out", str(tmp_path)])
        assert await handler.dispatch(args) == 0
        assert "small_mcf: PASS" in capsys.readouterr().out

    @pytest.mark.asyncio
    async def test_sweep_without_params_runs_the_base(self, handler, mocker, tmp_path):
        sweep = mocker.patch.object(
            handler.scenario_service,
            "sweep",
            mocker.AsyncMock(return_value=[ScenarioOutcome("small_mcf", 2)]),
        )
        args = build_parser().parse_args(["sweep", "--config", "small_mcf", "--out", str(tmp_path)])
        assert await handler.dispatch(args) == 2
        sweep.assert_awaited_once_with("small_mcf", {}, str(tmp_path), None, None)


class TestApplication:
    """Tests for Application.run exit codes."""

    @pytest.mark.asyncio
    async def test_list_bundled(self, test_settings, capsys):
        assert await Application(test_settings).run(["list"]) == 0
        assert "mcf_periodic_interior_bound" in capsys.readouterr().out

    @pytest.mark.asyncio
    async def test_unknown_scenario_exits_with_error(self, test_settings, tmp_path):
        code = await Application(test_settings).run(
            ["run", "--config", "no_such_scenario", "--out", str(tmp_path)]
        )
        assert code == 1

    @pytest.mark.asyncio
    async def test_barrier_command_writes_files(self, test_settings, tmp_path):
        """Test that the csf barrier exports its residual table and summary."""
        code = await Application(test_settings).run(
            ["barrier", "--family", "csf", "--length", "0.5", "--t-max", "0.1"]
            + ["--out", str(tmp_path)]
        )
        assert code == 0
        barriers = tmp_path / "barriers"
        assert len(list(barriers.glob("*.csv"))) == 1
        summary = json.loads(next(barriers.glob("*.json")).read_text())
        assert summary["report"]["pass"] is True

    @pytest.mark.asyncio
    async def test_aniso_check(self, test_settings, capsys):
        code = await Application(test_settings).run(
            ["aniso-check", "--norm", "quartic", "--epsilon", "0.3", "--samples", "500"]
        )
        assert code == 0
        assert "duality_round_trip" in capsys.readouterr().out

    @pytest.mark.asyncio
    async def test_bad_option_value(self, test_settings):
        assert await Application(test_settings).run(["list", "--workers", "0"]) == 1

    @pytest.mark.asyncio
    async def test_malformed_sweep_param(self, test_settings, tmp_path):
        code = await Application(test_settings).run(
            ["sweep", "--config", "mcf_periodic_interior_bound", "--param", "model.p"]
            + ["--out", str(tmp_path)]
        )
        assert code == 1
