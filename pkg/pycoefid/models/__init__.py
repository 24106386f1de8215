"""Package for data models used in the pycoefid package"""

# Import problem models
from .problem_model import (
    CircleRegion,
    CoefficientSpec,
    Domain,
    ProblemSpec,
    RectangleRegion,
    RegionCoefficient,
    SourceSpec,
)

# Import configuration models
from .config_model import IdentificationConfig, RunConfig, load_run_config, parse_run_config

# Export all models
__all__ = [
    'CircleRegion',
    'CoefficientSpec',
    'Domain',
    'IdentificationConfig',
    'ProblemSpec',
    'RectangleRegion',
    'RegionCoefficient',
    'RunConfig',
    'SourceSpec',
    'load_run_config',
    'parse_run_config',
]
