"""pycoefid - identification of the reaction coefficient of a parabolic equation from final-time data."""

__version__ = "1.0.0"

import logging

logger = logging.getLogger(__name__)

from pycoefid.fem.mesh import Mesh, build_rect_mesh
from pycoefid.models.problem_model import (
    CoefficientSpec,
    ProblemSpec,
    RegionCoefficient,
    SourceSpec,
)
from pycoefid.models.config_model import IdentificationConfig, RunConfig
from pycoefid.problems.library import generate_synthetic_data, unit_square_problem
from pycoefid.solvers.forward import ForwardSolution, TimeGrid, solve_forward
from pycoefid.solvers.identifier import IdentificationResult, identify

__all__ = [
    'CoefficientSpec',
    'ForwardSolution',
    'IdentificationConfig',
    'IdentificationResult',
    'Mesh',
    'ProblemSpec',
    'RegionCoefficient',
    'RunConfig',
    'SourceSpec',
    'TimeGrid',
    'build_rect_mesh',
    'generate_synthetic_data',
    'identify',
    'unit_square_problem',
    'solve_forward',
]
