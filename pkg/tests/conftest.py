import copy
import json

import pytest

from pycoefid.fem.assembly import assemble_operators
from pycoefid.fem.mesh import build_rect_mesh
from pycoefid.problems.library import unit_square_problem

REFERENCE_REACTION = {
    "background": 0.0,
    "regions": [
        {"shape": "circle", "center": [0.6, 0.4], "radius": 0.3, "value": 5.0},
        {"shape": "rectangle", "center": [0.3, 0.8], "side_x": 0.2, "side_y": 0.2, "value": 1.0},
    ],
}

SMALL_CONFIG = {
    "mesh": {"nx": 4, "ny": 4},
    "coefficients": {"diffusion": 1.0, "robin": 10.0, "reaction": REFERENCE_REACTION},
    "source": {"amplitude": 100.0, "time_power": 1, "exponents": [-1.0, 0.0]},
    "time": {"horizon": 0.25, "tau": 0.05, "data_tau": 0.005, "data_theta": 0.5, "study_taus": [0.05, 0.025]},
    "identification": {"init_mode": "from_above", "max_iterations": 3},
}


@pytest.fixture(scope="session")
def unit_square():
    return unit_square_problem()


@pytest.fixture(scope="session")
def mesh4():
    return build_rect_mesh(1.0, 1.0, 4, 4)


@pytest.fixture(scope="session")
def mesh16():
    return build_rect_mesh(1.0, 1.0, 16, 16)


@pytest.fixture(scope="session")
def ops16(unit_square, mesh16):
    return assemble_operators(mesh16, unit_square.coeff)


@pytest.fixture
def small_config():
    """A fresh, mutable copy of a small configuration document."""
    return copy.deepcopy(SMALL_CONFIG)


@pytest.fixture
def write_config(tmp_path):
    """Write a configuration dict to a JSON file and return its path."""
    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write
