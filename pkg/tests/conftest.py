"""Pytest configuration and fixtures."""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to Python path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from gradflow_lab.config.settings import Settings
from gradflow_lab.models.coefficients import MCFModel, PLaplacianModel
from gradflow_lab.models.grid import BoundaryCondition, DomainSpec
from gradflow_lab.services.scenario_service import ScenarioService

SCENARIO_DIR = Path(__file__).parent.parent / "assets" / "scenarios"


@pytest.fixture
def test_settings(tmp_path):
    """Settings writing artifacts and logs under a temporary directory."""
    return Settings(
        output_root=str(tmp_path / "runs"),
        scenario_dir=str(SCENARIO_DIR),
        log_dir=str(tmp_path / "logs"),
        log_level="DEBUG",
        json_logs=False,
        workers=2,
        seed=0,
    )


@pytest.fixture
def periodic_1d():
    """Unit periodic interval with 32 samples."""
    return DomainSpec.unit_periodic(1, 32)


@pytest.fixture
def periodic_2d():
    """Unit periodic square with 16 x 16 samples."""
    return DomainSpec.unit_periodic(2, 16)


@pytest.fixture
def dirichlet_interval():
    """Interval [0, 1] with zero boundary values."""
    return DomainSpec.rectangle([0.0], [1.0], [32])


@pytest.fixture
def dirichlet_square():
    return DomainSpec.rectangle([0.0, 0.0], [1.0, 1.0], [16, 16])


@pytest.fixture
def neumann_square():
    return DomainSpec.rectangle([0.0, 0.0], [1.0, 1.0], [16, 16], BoundaryCondition.NEUMANN)


@pytest.fixture
def unit_disk():
    return DomainSpec.disk([0.0, 0.0], 1.0, 32)


@pytest.fixture
def mcf_1d():
    return MCFModel(1)


@pytest.fixture
def heat_1d():
    """p = 2 is the linear heat equation."""
    return PLaplacianModel(1, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_scenario_data():
    """A 1D periodic mean curvature scenario that runs in well under a second."""
    return {
        "schema_version": 1,
        "name": "small_mcf",
        "result": "gradient bound for graphical mean curvature flow",
        "model": {"kind": "mcf", "dimension": 1},
        "domain": {"kind": "periodic", "boundary": "periodic", "resolution": [32]},
        "initial": {"recipe": "sine_wave", "amplitude": 0.5},
        "barrier": {"family": "csf"},
        "checks": [
            {"kind": "gradient_bound", "curve": "mcf"},
            {"kind": "modulus"},
        ],
        "evolution": {"t_end": 0.02, "checkpoints": [0.0, 0.01, 0.02]},
        "seed": 0,
    }


@pytest.fixture
def scenario_dir(tmp_path, small_scenario_data):
    """Directory holding one valid and one invalid scenario file."""
    directory = tmp_path / "scenarios"
    directory.mkdir()
    (directory / "small_mcf.json").write_text(json.dumps(small_scenario_data), encoding="utf-8")
    broken = dict(small_scenario_data, name="broken", colour="blue")
    (directory / "broken.json").write_text(json.dumps(broken), encoding="utf-8")
    return directory


@pytest.fixture
def scenario_service(test_settings, scenario_dir):
    """Scenario service over the temporary scenario directory."""
    return ScenarioService(test_settings, str(scenario_dir))
