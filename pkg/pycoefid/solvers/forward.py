"""
Direct problem solver: two-level theta-schemes for
    du/dt + A u + c u = f,   k du/dn + mu u = 0 on the boundary,   u(x, 0) = 0,
discretised with P1 elements and mass lumping.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pycoefid.fem.assembly import FemOperators, NodeField, assemble_operators, lumped_load, weighted_lumped_mass
from pycoefid.fem.mesh import Mesh, is_nonobtuse
from pycoefid.models.problem_model import CoefficientSpec, SourceSpec
from pycoefid.solvers.linalg import DEFAULT_REL_TOL, SparseMatrix, SpdSolver
from pycoefid.utils.validation import as_node_field

logger = logging.getLogger(__name__)

THETAS = (1.0, 0.5)

# Relative slack (times max |w|) for the discrete maximum principle checks
DMP_TOL = 1e-10

# Allowed relative mismatch between steps * tau and the horizon
GRID_TOL = 1e-12


class TimeGrid(BaseModel):
    """Uniform time grid t_n = n * tau, n = 0..steps, with steps * tau = horizon."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    horizon: float = Field(gt=0)
    steps: int = Field(ge=1)

    @property
    def tau(self) -> float:
        return self.horizon / self.steps

    @classmethod
    def from_step(cls, horizon: float, tau: float) -> "TimeGrid":
        """
        Build the grid with step ``tau`` on [0, horizon].

        Raises:
            ValueError: If tau is not positive or does not divide the horizon
        """
        if not tau > 0:
            raise ValueError(f"Time step must be positive, got {tau}")
        if not horizon > 0:
            raise ValueError(f"Horizon must be positive, got {horizon}")
        steps = int(round(horizon / tau))
        if steps < 1 or abs(steps * tau - horizon) > GRID_TOL * horizon:
            raise ValueError(f"Time step {tau} does not divide the horizon {horizon}")
        return cls(horizon=horizon, steps=steps)

    def times(self) -> np.ndarray:
        """t_0..t_N; the last entry is exactly the horizon."""
        return np.linspace(0.0, self.horizon, self.steps + 1)


class MonotonicityReport(BaseModel):
    """Discrete maximum principle diagnostics of one forward solve."""
    min_value: float
    min_increment: float
    scale: float
    nonnegative: bool
    nondecreasing: bool


@dataclass(eq=False)
class ForwardSolution:
    """
    Result of a forward solve.

    ``time_derivative_at_T`` is (final - penultimate) / tau, the backward difference at the
    final time used by the coefficient update.
    """
    final: NodeField
    penultimate: NodeField
    grid: TimeGrid
    theta: float
    step_min: np.ndarray
    step_max: np.ndarray
    step_min_increment: np.ndarray
    trajectory: Optional[List[NodeField]] = None
    dmp_hypotheses: bool = False
    dmp_violated: bool = False
    time_derivative_at_T: NodeField = field(init=False)

    def __post_init__(self):
        self.time_derivative_at_T = (self.final - self.penultimate) / self.grid.tau

    @property
    def tau(self) -> float:
        return self.grid.tau


def _system_matrices(K: SparseMatrix, m: np.ndarray, D: np.ndarray, tau: float, theta: float):
    """
    Left and right operators of the theta-scheme (M/tau + theta L) w+ = (M/tau - (1-theta) L) w + load.

    ``D`` is the lumped reaction term c_i m_i.
    """
    L = K + sp.diags(D)
    M_tau = sp.diags(m / tau)
    lhs = (M_tau + theta * L).tocsr()
    rhs = (M_tau - (1.0 - theta) * L).tocsr()
    return lhs, rhs


def step_implicit(K: SparseMatrix, m: np.ndarray, c: NodeField, w_n: NodeField, F_next: np.ndarray, tau: float,
                  rel_tol: float = DEFAULT_REL_TOL, method: str = "direct") -> NodeField:
    """
    One fully implicit step:
        (diag(m)/tau + K + diag(c m)) w_{n+1} = diag(m)/tau w_n + F_{n+1}.

    Raises:
        SolverConvergenceError: If the linear solve fails
    """
    n = K.shape[0]
    c = as_node_field("c", c, n)
    w_n = as_node_field("w_n", w_n, n)
    F_next = as_node_field("F_next", F_next, n)
    lhs, _ = _system_matrices(K, m, c * m, tau, 1.0)
    return SpdSolver(lhs, rel_tol=rel_tol, method=method).solve(m / tau * w_n + F_next)


def solve_forward(mesh: Mesh, coeff: CoefficientSpec, c: NodeField, source: SourceSpec, grid: TimeGrid,
                  theta: float = 1.0, keep_trajectory: bool = False, operators: Optional[FemOperators] = None,
                  rel_tol: float = DEFAULT_REL_TOL, method: str = "direct") -> ForwardSolution:
    """
    Solve the direct problem from w_0 = 0 over ``grid``.

    The system matrix does not change in time, so the solver setup is done once. Only the
    last two levels are kept unless ``keep_trajectory`` is set.

    Args:
        mesh: Triangulation
        coeff: Diffusion and Robin coefficients
        c: Nodal reaction coefficient
        source: Source term
        grid: Time grid
        theta: 1 (fully implicit) or 1/2 (Crank-Nicolson)
        keep_trajectory: Store every level w_0..w_N
        operators: Pre-assembled stiffness and lumped mass for (mesh, coeff)
        rel_tol: Linear solver relative residual
        method: Linear solver method, ``"direct"`` or ``"cg"``

    Returns:
        ForwardSolution with the final and penultimate levels and per-step statistics
    """
    if theta not in THETAS:
        raise ValueError(f"theta must be one of {THETAS}, got {theta}")
    if operators is None:
        operators = assemble_operators(mesh, coeff)
    c = as_node_field("c", c, mesh.node_count)
    K, m = operators.stiffness, operators.lumped_mass
    tau = grid.tau

    start_time = time.time()
    lhs, rhs = _system_matrices(K, m, weighted_lumped_mass(mesh, c, m), tau, theta)
    solver = SpdSolver(lhs, rel_tol=rel_tol, method=method)

    times = grid.times()
    load_profile = lumped_load(mesh, source.spatial_profile(mesh.nodes), m)

    # Sign conditions under which the discrete solution must be nonnegative and nondecreasing
    dmp_hypotheses = (theta == 1.0 and not source.condition_violations()
                      and bool(np.all(c >= 0)) and is_nonobtuse(mesh))

    w = np.zeros(mesh.node_count)
    w_prev = w
    trajectory = [w.copy()] if keep_trajectory else None
    step_min = np.empty(grid.steps)
    step_max = np.empty(grid.steps)
    step_min_increment = np.empty(grid.steps)
    F_prev = source.time_factor(times[0]) * load_profile

    for n in range(grid.steps):
        F_next = source.time_factor(times[n + 1]) * load_profile
        b = rhs @ w + theta * F_next
        if theta != 1.0:
            b += (1.0 - theta) * F_prev
        w_prev, w = w, solver.solve(b)
        F_prev = F_next

        step_min[n] = w.min()
        step_max[n] = w.max()
        step_min_increment[n] = (w - w_prev).min()
        if keep_trajectory:
            trajectory.append(w.copy())

    solution = ForwardSolution(
        final=w,
        penultimate=w_prev,
        grid=grid,
        theta=theta,
        step_min=step_min,
        step_max=step_max,
        step_min_increment=step_min_increment,
        trajectory=trajectory,
        dmp_hypotheses=dmp_hypotheses,
    )

    if dmp_hypotheses:
        report = check_discrete_monotonicity(solution)
        if not (report.nonnegative and report.nondecreasing):
            solution.dmp_violated = True
            logger.warning(f"Discrete maximum principle violated: min w = {report.min_value:.3e}, "
                           f"min increment = {report.min_increment:.3e} (scale {report.scale:.3e})")

    logger.debug(f"Forward solve: {grid.steps} steps, theta={theta}, tau={tau:.3e}, "
                 f"min={w.min():.6g}, max={w.max():.6g}, {time.time() - start_time:.2f}s")
    return solution


def check_discrete_monotonicity(sol: ForwardSolution) -> MonotonicityReport:
    """
    Report min_n min_i w_n and min_n min_i (w_{n+1} - w_n).

    Uses the stored trajectory when there is one, the per-step statistics otherwise. Both
    minima should be >= -1e-10 max|w| when f(., 0) = 0 and f grows in time.
    """
    if sol.trajectory is not None:
        levels = np.asarray(sol.trajectory)
        min_value = float(levels.min())
        scale = float(np.abs(levels).max())
        min_increment = float(np.diff(levels, axis=0).min()) if levels.shape[0] > 1 else 0.0
    else:
        min_value = min(0.0, float(sol.step_min.min()))
        scale = float(max(abs(sol.step_min.min()), abs(sol.step_max.max())))
        min_increment = float(sol.step_min_increment.min())

    slack = DMP_TOL * scale
    return MonotonicityReport(
        min_value=min_value,
        min_increment=min_increment,
        scale=scale,
        nonnegative=min_value >= -slack,
        nondecreasing=min_increment >= -slack,
    )
