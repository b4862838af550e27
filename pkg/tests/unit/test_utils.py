"""Tests for utility functions, settings and logging."""

import json
import logging

import numpy as np
import pytest
from pydantic import ValidationError

from gradflow_lab.config.logging_config import get_logger, setup_logging
from gradflow_lab.config.settings import Settings
from gradflow_lab.utils.helpers import (
    format_table,
    geometric_times,
    halton_points,
    json_ready,
    lexicographic_translates,
    sphere_samples,
    tangent_basis,
)
from gradflow_lab.utils.validators import (
    validate_exponent,
    validate_finite_array,
    validate_scenario_name,
    validate_symmetric_positive_definite,
)


class TestHelpers:
    """Tests for helper functions."""

    def test_json_ready(self):
        """Test conversion of numpy values and non-finite floats."""
        payload = json_ready(
            {
                "a": np.float64(1.5),
                "b": np.array([1, 2]),
                "c": np.nan,
                "d": (np.bool_(True), -np.inf),
            }
        )
        assert payload == {"a": 1.5, "b": [1, 2], "c": None, "d": [True, None]}
        json.dumps(payload, allow_nan=False)

    def test_format_table(self):
        rows = [["t=0.1", -0.25, True], ["t=0.2", 0.5, False]]
        table = format_table(rows, ["time", "margin", "ok"])
        lines = table.splitlines()
        assert lines[0].split() == ["time", "margin", "ok"]
        assert set(lines[1].replace(" ", "")) == {"-"}
        assert lines[2].split() == ["t=0.1", "-0.25", "PASS"]
        assert lines[3].split() == ["t=0.2", "0.5", "FAIL"]

    def test_geometric_times(self):
        assert geometric_times(0.01, 1.0, 3) == [0.01, 0.1, 1.0]
        assert geometric_times(0.5, 2.0, 1) == [2.0]

    @pytest.mark.parametrize("dimension", [1, 2, 3, 4])
    def test_sphere_samples_are_unit(self, dimension):
        samples = sphere_samples(dimension, 200)
        np.testing.assert_allclose(np.linalg.norm(samples, axis=1), 1.0)

    def test_halton_points_are_deterministic(self):
        first = halton_points(16, 2)
        np.testing.assert_array_equal(first, halton_points(16, 2))
        assert np.all((first > 0.0) & (first < 1.0))

    def test_tangent_basis(self):
        direction = np.array([0.6, 0.8, 0.0])
        basis = tangent_basis(direction)
        assert basis.shape == (2, 3)
        np.testing.assert_allclose(basis @ direction, 0.0, atol=1e-12)
        np.testing.assert_allclose(basis @ basis.T, np.eye(2), atol=1e-12)

    def test_lexicographic_translates(self):
        translates = lexicographic_translates(2)
        assert len(translates) == 9
        np.testing.assert_array_equal(translates[0], [-1.0, -1.0])


class TestValidators:
    """Tests for validator functions."""

    def test_validate_finite_array(self):
        assert validate_finite_array([1.0, 2.0])
        assert not validate_finite_array([1.0, np.inf])
        assert not validate_finite_array(["a"])

    def test_validate_symmetric_positive_definite(self):
        assert validate_symmetric_positive_definite([[2.0, 0.5], [0.5, 1.0]])
        assert not validate_symmetric_positive_definite([[1.0, 2.0], [0.0, 1.0]])
        assert not validate_symmetric_positive_definite([[1.0, 0.0], [0.0, -1.0]])
        assert not validate_symmetric_positive_definite([1.0, 2.0])

    def test_validate_exponent(self):
        assert validate_exponent(1.5)
        assert not validate_exponent(1.0)
        assert not validate_exponent(None)

    def test_validate_scenario_name(self):
        assert validate_scenario_name("mcf_periodic_interior_bound")
        assert validate_scenario_name("small_mcf__p=1.5")
        assert not validate_scenario_name("Upper")
        assert not validate_scenario_name("9lives")
        assert not validate_scenario_name("a" * 121)
        assert not validate_scenario_name(None)


class TestSettings:
    """Tests for Settings."""

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("GRADFLOW_WORKERS", "3")
        monkeypatch.setenv("GRADFLOW_TOLERANCE_SCALE", "2.5")
        settings = Settings()
        assert settings.workers == 3
        assert settings.tolerance_scale == 2.5

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("GRADFLOW_CFL_SAFETY", raising=False)
        settings = Settings(_env_file=None)
        assert settings.cfl_safety == 0.4
        assert settings.dt_refresh_interval == 16
        assert settings.gradient_slack == 0.05

    def test_invalid_values(self):
        with pytest.raises(ValidationError):
            Settings(cfl_safety=1.5)
        with pytest.raises(ValidationError):
            Settings(workers=0)


class TestLogging:
    """Tests for logging setup."""

    def test_json_log_file(self, tmp_path):
        setup_logging("INFO", "lab.log", str(tmp_path), json_logs=True)
        get_logger("gradflow_lab.test").info("hello")
        for handler in logging.getLogger("gradflow_lab").handlers:
            handler.flush()
        line = (tmp_path / "lab.log").read_text(encoding="utf-8").splitlines()[-1]
        assert json.loads(line)["message"] == "hello"
