"""
gradflow-lab - numerical laboratory for quasilinear parabolic gradient flows.

Evolves graphical and anisotropic mean curvature flow, p-Laplacian heat flow and general
isotropic flows on periodic cells, rectangles and disks, and checks time-interior gradient
estimates, modulus-of-continuity comparisons and boundary estimates against their barriers.
"""

__version__ = "1.0.0"
__author__ = "gradflow-lab developers"

from .core.application import Application
from .services.scenario_service import ScenarioService

__all__ = ["Application", "ScenarioService"]
