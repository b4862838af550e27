"""Numerical services for gradflow-lab."""

from .scenario_service import ScenarioOutcome, ScenarioService

__all__ = ["ScenarioOutcome", "ScenarioService"]
