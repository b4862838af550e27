"""Data models for gradflow-lab."""

from .anisotropy import AnisotropyModel, BoundaryGeometry, SphereConstants
from .barrier import BarrierProfile, PLaplacianBarrier, RadialProfile, TabulatedProfile
from .coefficients import (
    AnisotropicModel,
    CoefficientModel,
    CustomModel,
    IsotropicModel,
    MCFModel,
    PLaplacianModel,
)
from .grid import BoundaryCondition, DomainKind, DomainSpec, GridFunction, LatticeSpec
from .report import ModulusTable, PairScanResult, ReportEntry, VerificationReport
from .run import CheckpointDiagnostics, EvolutionRun
from .scenario import Scenario, ScenarioRepository

__all__ = [
    "AnisotropyModel",
    "BoundaryGeometry",
    "SphereConstants",
    "BarrierProfile",
    "PLaplacianBarrier",
    "RadialProfile",
    "TabulatedProfile",
    "AnisotropicModel",
    "CoefficientModel",
    "CustomModel",
    "IsotropicModel",
    "MCFModel",
    "PLaplacianModel",
    "BoundaryCondition",
    "DomainKind",
    "DomainSpec",
    "GridFunction",
    "LatticeSpec",
    "ModulusTable",
    "PairScanResult",
    "ReportEntry",
    "VerificationReport",
    "CheckpointDiagnostics",
    "EvolutionRun",
    "Scenario",
    "ScenarioRepository",
]
