"""Tests for the explicit evolution and initial-data recipes."""

import numpy as np
import pytest

from gradflow_lab.core.exceptions import ConfigurationError, InstabilityError
from gradflow_lab.models.coefficients import MCFModel, PLaplacianModel
from gradflow_lab.models.grid import DomainSpec, GridFunction
from gradflow_lab.models.run import CheckpointDiagnostics, EvolutionRun
from gradflow_lab.services import evolution_service
from gradflow_lab.services.evolution_service import (
    bump_kernel,
    checkpoint_diagnostics,
    cone,
    geometric_checkpoints,
    load_initial,
    make_square_wave,
    mollification_deviation,
    mollify,
    product_sines,
    radial_cap,
    run_to,
    sample_field,
    sine_wave,
    stable_time_step,
    step,
)
from gradflow_lab.services.grid_service import oscillation, save_csv
from gradflow_lab.services.verification_service import calibrate_disc_constant, empirical_modulus


def heat_error(resolution: int, t_end: float = 0.05) -> float:
    domain = DomainSpec.unit_periodic(1, resolution)
    run = EvolutionRun(PLaplacianModel(1, 2.0), domain, sine_wave(domain))
    run_to(run, t_end)
    x = domain.coordinates()[..., 0]
    exact = np.exp(-4.0 * np.pi**2 * t_end) * np.sin(2.0 * np.pi * x)
    return float(np.max(np.abs(run.state.values - exact)))


def diagonal_square_wave(domain: DomainSpec) -> GridFunction:
    """+1/2 and -1/2 in stripes along x1 + x2 on the unit cell."""
    return sample_field(
        domain, lambda x: np.where(np.mod(x[..., 0] + x[..., 1], 1.0) < 0.5, 0.5, -0.5)
    )


class TestHeatAccuracy:
    """Tests against the exact periodic heat solution."""

    def test_error_within_tolerance(self):
        domain = DomainSpec.unit_periodic(1, 32)
        assert heat_error(32) <= domain.h_max**2

    def test_second_order_convergence(self):
        ratio = heat_error(32) / heat_error(64)
        assert 3.5 <= ratio <= 4.5

    def test_calibrated_constant_is_below_default(self):
        constant = calibrate_disc_constant()
        assert 0.0 < constant <= 1.0


class TestEvolutionRun:
    """Tests for stepping, checkpoints and failure modes."""

    def test_time_step_from_observed_eigenvalue(self, periodic_1d, heat_1d):
        run = EvolutionRun(heat_1d, periodic_1d, sine_wave(periodic_1d), cfl_safety=0.5)
        assert stable_time_step(run) == pytest.approx(0.5 * periodic_1d.h_min**2 / 2.0)
        assert run.lambda_obs == pytest.approx(1.0)

    def test_checkpoints_are_recorded_in_order(self, periodic_1d, mcf_1d):
        """Test that every checkpoint gets a snapshot at exactly its time."""
        checkpoints = [0.0, 0.003, 0.01]
        run = EvolutionRun(mcf_1d, periodic_1d, sine_wave(periodic_1d), checkpoints=checkpoints)
        run_to(run, 0.01)
        assert [s.time for s in run.snapshots] == checkpoints
        assert len(run.diagnostics) == 3
        assert run.snapshot_at(0.003).time == 0.003
        with pytest.raises(KeyError):
            run.snapshot_at(0.5)

    def test_maximum_principle(self, periodic_1d, mcf_1d):
        """Test that the square wave's oscillation and extremes never grow."""
        u0 = make_square_wave(periodic_1d)
        checkpoints = list(np.linspace(0.0, 0.02, 11))
        run = EvolutionRun(mcf_1d, periodic_1d, u0, checkpoints=checkpoints)
        run_to(run, 0.02)
        assert run.oscillation_monotone()
        assert run.extremes_monotone()
        assert run.diagnostics[-1].oscillation < oscillation(u0)

    def test_dirichlet_boundary_stays_zero(self, dirichlet_square):
        model = MCFModel(2)
        run = EvolutionRun(model, dirichlet_square, product_sines(dirichlet_square))
        run_to(run, 0.005)
        values = run.state.values
        assert np.all(values[0] == 0.0) and np.all(values[:, -1] == 0.0)

    def test_step_budget(self, periodic_1d, mcf_1d):
        run = EvolutionRun(mcf_1d, periodic_1d, sine_wave(periodic_1d), max_steps=3)
        with pytest.raises(InstabilityError) as excinfo:
            run_to(run, 1.0)
        assert excinfo.value.diagnostics["steps"] == 3

    def test_vanishing_coefficients_are_a_fixed_point(self, periodic_1d):
        """Test that a constant state of a degenerate flow does not move."""
        flat = GridFunction(periodic_1d, np.full(periodic_1d.shape, 0.3))
        run = EvolutionRun(PLaplacianModel(1, 3.0), periodic_1d, flat)
        step(run)
        assert run.steps == 0
        np.testing.assert_array_equal(run.state.values, flat.values)

    def test_invalid_configuration(self, periodic_1d, mcf_1d):
        u0 = sine_wave(periodic_1d)
        with pytest.raises(ConfigurationError):
            EvolutionRun(mcf_1d, periodic_1d, u0, cfl_safety=1.5)
        with pytest.raises(ConfigurationError):
            EvolutionRun(mcf_1d, periodic_1d, u0, checkpoints=[0.2, 0.1])
        with pytest.raises(ConfigurationError):
            EvolutionRun(MCFModel(2), periodic_1d, u0)
        run = EvolutionRun(mcf_1d, periodic_1d, u0)
        run_to(run, 0.001)
        with pytest.raises(ConfigurationError):
            run_to(run, 0.0)

    def test_diagnostics_summary(self, periodic_1d, heat_1d):
        run = EvolutionRun(heat_1d, periodic_1d, sine_wave(periodic_1d), checkpoints=[0.0])
        run_to(run, 0.001)
        summary = run.summary()
        assert summary["checkpoints"][0]["oscillation"] == pytest.approx(oscillation(run.initial))
        assert summary["dt_max"] is not None
        assert summary["oscillation_monotone"] and summary["extremes_monotone"]

    def test_summary_flags_growing_maximum(self, periodic_1d, heat_1d):
        run = EvolutionRun(heat_1d, periodic_1d, sine_wave(periodic_1d))
        run.diagnostics = [
            CheckpointDiagnostics(0.0, 1.0, 2.0, 1.0, -1.0, 1.0, 0),
            CheckpointDiagnostics(0.1, 1.0, 2.0, 1.0, -0.9, 1.1, 5),
        ]
        summary = run.summary()
        assert summary["oscillation_monotone"]
        assert not summary["extremes_monotone"]

    def test_violation_is_logged(self, periodic_1d, heat_1d, mocker):
        """Test that run_to warns when the recorded extremes are not monotone."""
        warning = mocker.patch.object(evolution_service.logger, "warning")
        mocker.patch.object(EvolutionRun, "extremes_monotone", return_value=False)
        run = EvolutionRun(heat_1d, periodic_1d, sine_wave(periodic_1d), checkpoints=[0.0])
        run_to(run, 0.001)
        warning.assert_called_once()
        assert "maximum principle" in warning.call_args[0][0]

    def test_energy_of_quadratic(self, dirichlet_interval, heat_1d):
        """Test the Dirichlet energy sum of u = x(1 - x) over the updated samples."""
        x = dirichlet_interval.coordinates()[..., 0]
        u = GridFunction(dirichlet_interval, x * (1.0 - x))
        diagnostics = checkpoint_diagnostics(heat_1d, u)
        inner = x[1:-1]
        expected = np.sum(0.5 * (1.0 - 2.0 * inner) ** 2) / 32
        assert diagnostics.energy == pytest.approx(expected, rel=1e-8)
        assert diagnostics.energy == pytest.approx(1.0 / 6.0, rel=0.15)


class TestMaximumPrinciple2D:
    """Tests for the discrete maximum principle with mixed second derivatives."""

    def test_dirichlet_cone(self):
        """Test that MCF from a tilted cone never raises its maximum."""
        domain = DomainSpec.rectangle([0.0, 0.0], [1.0, 1.0], [64, 64])
        u0 = cone(domain, [0.5, 0.5], 4.0)
        checkpoints = list(np.linspace(0.0, 2e-3, 41))
        run = EvolutionRun(MCFModel(2), domain, u0, checkpoints=checkpoints)
        run_to(run, 2e-3)
        assert run.extremes_monotone()
        assert run.oscillation_monotone()
        assert run.diagnostics[-1].maximum <= run.diagnostics[0].maximum + 1e-10

    def test_periodic_diagonal_jump(self):
        """Test an unmollified jump across the cell diagonal on a 64 x 64 cell."""
        domain = DomainSpec.unit_periodic(2, 64)
        u0 = diagonal_square_wave(domain)
        checkpoints = list(np.linspace(0.0, 5e-3, 26))
        run = EvolutionRun(MCFModel(2), domain, u0, checkpoints=checkpoints)
        run_to(run, 5e-3)
        assert run.steps >= 200
        assert run.extremes_monotone()
        assert run.state.values.max() <= 0.5 + 1e-10
        assert run.state.values.min() >= -0.5 - 1e-10
        assert run.summary()["extremes_monotone"]

    @pytest.mark.slow
    def test_mollified_wave_oscillation_decays(self):
        domain = DomainSpec.unit_periodic(2, 96)
        u0 = mollify(diagonal_square_wave(domain), 0.05)
        checkpoints = list(np.linspace(0.0, 0.01, 11))
        run = EvolutionRun(MCFModel(2), domain, u0, checkpoints=checkpoints)
        run_to(run, 0.01)
        assert run.oscillation_monotone()
        assert run.diagnostics[-1].oscillation < run.diagnostics[0].oscillation

    def test_translation_equivariance(self):
        """Test that shifting the data by whole cells shifts the evolved state."""
        domain = DomainSpec.unit_periodic(2, 32)
        u0 = mollify(diagonal_square_wave(domain), 0.1)
        moved = GridFunction(domain, np.roll(u0.values, (5, 3), axis=(0, 1)))
        first = run_to(EvolutionRun(MCFModel(2), domain, u0), 2e-3)
        second = run_to(EvolutionRun(MCFModel(2), domain, moved), 2e-3)
        assert first.steps == second.steps
        np.testing.assert_allclose(
            np.roll(first.state.values, (5, 3), axis=(0, 1)), second.state.values, atol=1e-12
        )


class TestInitialData:
    """Tests for the initial-data recipes."""

    def test_square_wave(self, periodic_2d):
        u0 = make_square_wave(periodic_2d, axis=1, amplitude=2.0)
        assert oscillation(u0) == 2.0
        assert u0.values[0, 0] == 1.0 and u0.values[0, -1] == -1.0

    def test_product_sines_vanish_on_faces(self, dirichlet_square):
        u0 = product_sines(dirichlet_square, [1, 2])
        assert np.all(u0.values[-1] == 0.0)

    def test_radial_cap_needs_disk(self, periodic_2d, unit_disk):
        with pytest.raises(ConfigurationError):
            radial_cap(periodic_2d)
        cap = radial_cap(unit_disk, amplitude=2.0)
        assert cap.sample_values().max() == pytest.approx(2.0)

    def test_cone(self, dirichlet_square):
        u0 = cone(dirichlet_square, [0.5, 0.5], 2.0)
        assert u0.values[8, 8] == pytest.approx(0.0)

    def test_load_initial(self, periodic_2d, tmp_path):
        u = sine_wave(periodic_2d, axis=1)
        save_csv(GridFunction(periodic_2d, u.values, 0.7), tmp_path / "u0.csv")
        loaded = load_initial(tmp_path / "u0.csv", periodic_2d)
        assert loaded.time == 0.0
        np.testing.assert_array_equal(loaded.values, u.values)

    def test_geometric_checkpoints(self):
        times = geometric_checkpoints(1e-3, 1e-1, 3)
        assert times == [0.001, 0.01, 0.1]


class TestMollifier:
    """Tests for the bump-kernel mollifier."""

    def test_kernel_has_unit_mass(self, periodic_2d):
        assert bump_kernel(periodic_2d, 0.2).sum() == pytest.approx(1.0)

    def test_kernel_too_large(self, periodic_2d):
        with pytest.raises(ConfigurationError):
            bump_kernel(periodic_2d, 0.7)

    def test_periodic_mollification(self, periodic_1d):
        """Test that mass and the range survive and the jump is smoothed."""
        u0 = make_square_wave(periodic_1d)
        smoothed = mollify(u0, 0.1)
        assert smoothed.values.sum() == pytest.approx(u0.values.sum(), abs=1e-12)
        assert smoothed.values.max() <= 0.5 + 1e-12
        assert 0.0 < mollification_deviation(u0, smoothed) <= 1.0

    def test_mollifiers_commute(self, periodic_2d, rng):
        u0 = GridFunction(periodic_2d, rng.standard_normal(periodic_2d.shape))
        first = mollify(mollify(u0, 0.1), 0.2)
        second = mollify(mollify(u0, 0.2), 0.1)
        np.testing.assert_allclose(first.values, second.values, atol=1e-10)

    def test_mollification_keeps_modulus(self, periodic_2d, rng, test_settings):
        """Test that smoothing never raises the empirical modulus of continuity."""
        u0 = GridFunction(periodic_2d, rng.standard_normal(periodic_2d.shape))
        raw = empirical_modulus(u0, settings=test_settings)
        smoothed = empirical_modulus(mollify(u0, 0.15), settings=test_settings)
        s = np.linspace(0.0, raw.s[-1], 50)
        assert np.all(smoothed(s) <= raw(s) + 1e-12)

    def test_closed_form_field(self, periodic_1d):
        smoothed = mollify(lambda x: np.cos(2 * np.pi * x[..., 0]), 0.05, periodic_1d)
        assert smoothed.values.shape == periodic_1d.shape

    def test_closed_form_needs_domain(self):
        with pytest.raises(ConfigurationError):
            mollify(lambda x: x[..., 0], 0.05)
