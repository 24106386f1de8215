"""
Problem definitions and synthetic final-time data.
"""
import logging
from typing import Optional, Sequence, Union

import numpy as np

from pycoefid.fem.assembly import FemOperators, NodeField
from pycoefid.fem.mesh import Mesh
from pycoefid.models.problem_model import (
    CircleRegion,
    CoefficientSpec,
    Domain,
    ProblemSpec,
    RectangleRegion,
    RegionCoefficient,
    SourceSpec,
)
from pycoefid.solvers.forward import TimeGrid, solve_forward
from pycoefid.solvers.linalg import DEFAULT_REL_TOL

logger = logging.getLogger(__name__)


def unit_square_problem() -> ProblemSpec:
    """
    Unit-square test problem: k = 1, mu = 10, f = 100 t exp(-x1), T = 0.25.

    The true coefficient is 5 in the disc of radius 0.3 around (0.6, 0.4), 1 in the square
    of side 0.2 centred at (0.3, 0.8) and 0 elsewhere.
    """
    c_true = RegionCoefficient(
        background=0.0,
        regions=[
            CircleRegion(center=(0.6, 0.4), radius=0.3, value=5.0),
            RectangleRegion(center=(0.3, 0.8), side_x=0.2, side_y=0.2, value=1.0),
        ],
    )
    return ProblemSpec(
        domain=Domain(x_len=1.0, y_len=1.0),
        coeff=CoefficientSpec(diffusion=RegionCoefficient.constant(1.0), robin=RegionCoefficient.constant(10.0)),
        source=SourceSpec(amplitude=100.0, time_power=1, exponents=(-1.0, 0.0)),
        horizon=0.25,
        c_true=c_true,
    )


def eval_region_coefficient(rc: RegionCoefficient, x: Sequence[float]) -> float:
    """Value of a region coefficient at a single point; the last region containing it wins."""
    return float(rc.evaluate(np.asarray(x, dtype=float).reshape(1, 2))[0])


def sample_to_nodes(mesh: Mesh, spec: Union[RegionCoefficient, SourceSpec], t: Optional[float] = None) -> NodeField:
    """
    Nodal interpolation of a coefficient, or of a source at time ``t``.
    """
    if isinstance(spec, SourceSpec):
        if t is None:
            raise ValueError("A source can only be sampled at a given time t")
        return spec.evaluate(mesh.nodes, t)
    return spec.evaluate(mesh.nodes)


def check_source_conditions(source: SourceSpec) -> bool:
    """
    Warn when f(x, 0) != 0 or f does not increase in time.

    Returns:
        True if both conditions hold
    """
    violations = source.condition_violations()
    for violation in violations:
        logger.warning(f"Source does not satisfy the sign conditions for monotone identification: {violation}")
    return not violations


def generate_synthetic_data(problem: ProblemSpec, mesh: Mesh, data_tau: float, theta: float = 0.5,
                            operators: Optional[FemOperators] = None, rel_tol: float = DEFAULT_REL_TOL,
                            method: str = "direct") -> NodeField:
    """
    Final-time observation psi = w_N of the direct problem with the true coefficient.

    Args:
        problem: Problem with ``c_true`` set
        mesh: Spatial mesh, the same one used for identification
        data_tau: Time step of the data run; must divide the horizon
        theta: 1 or 1/2
        operators: Pre-assembled operators for (mesh, problem.coeff)

    Returns:
        Nodal field psi
    """
    if problem.c_true is None:
        raise ValueError("Synthetic data needs a true reaction coefficient (c_true)")
    check_source_conditions(problem.source)

    grid = TimeGrid.from_step(problem.horizon, data_tau)
    c_nodes = sample_to_nodes(mesh, problem.c_true)
    logger.info(f"Generating final-time data: {grid.steps} steps of {grid.tau:.3e}, theta={theta}")
    solution = solve_forward(mesh, problem.coeff, c_nodes, problem.source, grid, theta=theta,
                             operators=operators, rel_tol=rel_tol, method=method)
    psi = solution.final
    logger.info(f"Final-time data: min={psi.min():.6g}, max={psi.max():.6g}")
    return psi
