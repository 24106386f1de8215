"""
Iterative identification of the reaction coefficient from final-time data.

With psi = u(x, T) observed, each iteration solves the direct problem with the current
coefficient c^k and then updates it pointwise from the equation at t = T:

    c^{k+1} psi = -(w_N - w_{N-1}) / tau - A psi + f(x, T).

Starting from c^0 psi = -A psi + f(x, T) the iterates decrease monotonically towards the
true coefficient; starting from c^0 = 0 they need not be monotone.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from pycoefid.exceptions import DimensionMismatchError, PsiFloorError
from pycoefid.fem.assembly import FemOperators, NodeField, apply_elliptic, assemble_operators
from pycoefid.fem.mesh import Mesh
from pycoefid.models.config_model import IdentificationConfig
from pycoefid.models.problem_model import ProblemSpec
from pycoefid.problems.library import check_source_conditions, sample_to_nodes
from pycoefid.solvers.forward import ForwardSolution, TimeGrid, solve_forward
from pycoefid.solvers.linalg import DEFAULT_REL_TOL, SparseMatrix
from pycoefid.utils.validation import as_node_field

logger = logging.getLogger(__name__)

# Default floor for psi, relative to max(psi)
PSI_FLOOR_FACTOR = 1e-8

# Slack for the from-above monotonicity checks, relative to max|c^0| and max|w_N|
MONOTONICITY_TOL = 1e-8


class IterationRecord(BaseModel):
    """Convergence data of iteration k (the coefficient c^k and the forward solve with it)."""
    k: int
    eps_inf: Optional[float] = None
    eps_2: Optional[float] = None
    delta_c_inf: float
    min_c: float
    max_increase: float
    min_w_increase: float


class ZeroStartReport(BaseModel):
    """Minimum of A(w_N^0 - psi); a nonnegative value is sufficient for monotone growth from c^0 = 0."""
    min_value: float
    holds: bool


@dataclass(eq=False)
class IdentificationResult:
    """
    Iterates, convergence history and monotonicity diagnostics of one identification run.

    ``coefficient_iterates`` holds c^0..c^K (or only c^0 and the final one when iterates are
    not kept); ``history`` has one record per completed iteration k = 1..K.
    """
    coefficient_iterates: List[NodeField]
    history: List[IterationRecord]
    converged: bool
    final_solution: ForwardSolution
    init_mode: str
    initial_errors: Optional[Tuple[float, float]] = None
    zero_start_condition: Optional[ZeroStartReport] = None
    worst_increase: float = 0.0
    worst_w_decrease: float = 0.0
    monotone: Optional[bool] = None
    iterates_complete: bool = True
    psi_floor: float = 0.0

    @property
    def final_coefficient(self) -> NodeField:
        return self.coefficient_iterates[-1]

    @property
    def iterations(self) -> int:
        return len(self.history)


def _resolve_psi_floor(psi: np.ndarray, psi_floor: Optional[float]) -> float:
    if psi_floor is not None:
        return psi_floor
    return PSI_FLOOR_FACTOR * float(np.max(psi))


def _check_psi(psi: np.ndarray, psi_floor: float) -> None:
    # The floor itself must be positive (psi == 0 everywhere gives a zero default)
    if not psi_floor > 0:
        node = int(np.argmin(psi))
        raise PsiFloorError(node, float(psi[node]), psi_floor)
    below = np.flatnonzero(~(psi >= psi_floor))
    if below.size:
        node = int(below[np.argmin(psi[below])])
        raise PsiFloorError(node, float(psi[node]), psi_floor)



def initial_coefficient_from_above(mesh: Mesh, K: SparseMatrix, m: np.ndarray, psi: NodeField, f_T: NodeField,
                                   psi_floor: float) -> NodeField:
    """
    Starting coefficient c^0 = (f(x, T) - (K psi) / m) / psi.

    This is the pointwise solution of (c^0 psi, v) = -a(psi, v) + (f(., T), v) with lumped
    mass, i.e. the update with the time derivative at T dropped.

    Raises:
        PsiFloorError: If psi falls below ``psi_floor`` at some node
    """
    psi = as_node_field("psi", psi, mesh.node_count)
    f_T = as_node_field("f_T", f_T, mesh.node_count)
    _check_psi(psi, psi_floor)
    return (f_T - apply_elliptic(mesh, K, m, psi)) / psi


def update_coefficient(mesh: Mesh, K: SparseMatrix, m: np.ndarray, psi: NodeField, f_T: NodeField,
                       sol: ForwardSolution, psi_floor: float, grid: Optional[TimeGrid] = None) -> NodeField:
    """
    Coefficient update c^{k+1} = (-(w_N - w_{N-1}) / tau - (K psi) / m + f(x, T)) / psi.

    Args:
        mesh: Mesh of the identification run
        K: Stiffness matrix
        m: Lumped mass
        psi: Final-time data
        f_T: Source sampled at the nodes at t = T
        sol: Forward solution computed with the current coefficient
        psi_floor: Smallest admissible psi value
        grid: Time grid of the run; when given, ``sol`` must have been computed on it

    Raises:
        PsiFloorError: If psi falls below the floor
        DimensionMismatchError: If the forward solution does not belong to this mesh or grid
    """
    if sol.final.shape[0] != mesh.node_count:
        raise DimensionMismatchError(
            f"Forward solution has {sol.final.shape[0]} nodal values, mesh has {mesh.node_count} nodes"
        )
    if grid is not None and sol.grid != grid:
        raise DimensionMismatchError(f"Forward solution grid {sol.grid} differs from the identification grid {grid}")
    return initial_coefficient_from_above(mesh, K, m, psi, f_T, psi_floor) - sol.time_derivative_at_T / np.asarray(psi, dtype=float)


def error_norms(c_k: NodeField, c_true: NodeField, m: np.ndarray) -> Tuple[float, float]:
    """
    Maximum-norm and lumped L2-norm distance between two nodal coefficients.

    Returns:
        (eps_inf, eps_2) with eps_2 = sqrt(sum_i m_i (c_k,i - c_true,i)^2)
    """
    c_k = np.asarray(c_k, dtype=float)
    c_true = np.asarray(c_true, dtype=float)
    m = np.asarray(m, dtype=float)
    if not (c_k.shape == c_true.shape == m.shape):
        raise DimensionMismatchError(f"Shapes differ: c_k {c_k.shape}, c_true {c_true.shape}, m {m.shape}")
    diff = c_k - c_true
    return float(np.max(np.abs(diff))), float(np.sqrt(np.sum(m * diff * diff)))


def check_zero_start_condition(u0_sol: ForwardSolution, psi: NodeField, K: SparseMatrix, m: np.ndarray,
                               mesh: Optional[Mesh] = None) -> ZeroStartReport:
    """
    Evaluate min_i A(w_N^0 - psi) for the first forward solve of a run started from c = 0.

    Pure observation: nonnegativity is the sufficient condition for the iterates to grow
    monotonically from below.
    """
    psi = np.asarray(psi, dtype=float)
    diff = u0_sol.final - psi
    if mesh is None:
        values = (K @ diff) / m
    else:
        values = apply_elliptic(mesh, K, m, diff)
    min_value = float(values.min())
    return ZeroStartReport(min_value=min_value, holds=min_value >= 0.0)


def iterate_differences(result: IdentificationResult) -> List[NodeField]:
    """xi^k = c^k - c^{k-1} for consecutive stored iterates."""
    iterates = result.coefficient_iterates
    return [iterates[k] - iterates[k - 1] for k in range(1, len(iterates))]


def coefficient_errors(result: IdentificationResult, c_true: NodeField) -> List[NodeField]:
    """delta c^k = c^k - c for every stored iterate."""
    c_true = np.asarray(c_true, dtype=float)
    return [c_k - c_true for c_k in result.coefficient_iterates]


def identify(problem: ProblemSpec, psi: NodeField, mesh: Mesh, grid: TimeGrid,
             config: Optional[IdentificationConfig] = None, operators: Optional[FemOperators] = None,
             rel_tol: float = DEFAULT_REL_TOL, method: str = "direct") -> IdentificationResult:
    """
    Identify the reaction coefficient from final-time data ``psi``.

    Alternates fully implicit forward solves and pointwise coefficient updates for
    ``config.max_iterations`` iterations, or until ||c^{k+1} - c^k||_inf < stop_tol.

    Args:
        problem: Problem data; ``c_true`` is used only for error reporting
        psi: Observed final state
        mesh: Spatial mesh
        grid: Time grid of the forward solves
        config: Identification settings
        operators: Pre-assembled operators for (mesh, problem.coeff)

    Returns:
        IdentificationResult

    Raises:
        PsiFloorError: If psi is not safely positive
        SolverConvergenceError: If a forward solve fails
    """
    config = config or IdentificationConfig()
    if abs(grid.horizon - problem.horizon) > 1e-12 * problem.horizon:
        raise ValueError(f"Time grid horizon {grid.horizon} differs from the problem horizon {problem.horizon}")
    if operators is None:
        operators = assemble_operators(mesh, problem.coeff)
    K, m = operators.stiffness, operators.lumped_mass

    psi = as_node_field("psi", psi, mesh.node_count)
    psi_floor = _resolve_psi_floor(psi, config.psi_floor)
    _check_psi(psi, psi_floor)
    check_source_conditions(problem.source)

    f_T = sample_to_nodes(mesh, problem.source, t=grid.horizon)
    c_true = sample_to_nodes(mesh, problem.c_true) if problem.c_true is not None else None

    def forward(c: np.ndarray) -> ForwardSolution:
        return solve_forward(mesh, problem.coeff, c, problem.source, grid, theta=1.0,
                             operators=operators, rel_tol=rel_tol, method=method)

    start_time = time.time()
    if config.init_mode == "from_above":
        c = initial_coefficient_from_above(mesh, K, m, psi, f_T, psi_floor)
    else:
        c = np.zeros(mesh.node_count)
    c0_scale = float(np.max(np.abs(c)))

    initial_errors = error_norms(c, c_true, m) if c_true is not None else None
    logger.info(f"Identification ({config.init_mode}): {mesh.node_count} nodes, {grid.steps} steps of {grid.tau:.3e}, "
                f"up to {config.max_iterations} iterations")
    if initial_errors is not None:
        logger.info(f"k=0: eps_inf={initial_errors[0]:.6e}, eps_2={initial_errors[1]:.6e}")

    sol = forward(c)
    zero_start_condition = None
    if config.init_mode == "zero":
        zero_start_condition = check_zero_start_condition(sol, psi, K, m, mesh=mesh)
        logger.info(f"Condition for monotone growth from zero: min A(w_N - psi) = {zero_start_condition.min_value:.6e}")

    iterates = [c]
    history: List[IterationRecord] = []
    converged = False
    worst_increase = -np.inf
    worst_w_decrease = np.inf

    for k in range(1, config.max_iterations + 1):
        c_new = update_coefficient(mesh, K, m, psi, f_T, sol, psi_floor, grid=grid)
        if config.clip_negative:
            c_new = np.maximum(c_new, 0.0)
        sol_new = forward(c_new)

        xi = c_new - c
        delta_c_inf = float(np.max(np.abs(xi)))
        max_increase = float(xi.max())
        min_w_increase = float((sol_new.final - sol.final).min())
        eps_inf, eps_2 = error_norms(c_new, c_true, m) if c_true is not None else (None, None)

        record = IterationRecord(
            k=k,
            eps_inf=eps_inf,
            eps_2=eps_2,
            delta_c_inf=delta_c_inf,
            min_c=float(c_new.min()),
            max_increase=max_increase,
            min_w_increase=min_w_increase,
        )
        history.append(record)
        worst_increase = max(worst_increase, max_increase)
        worst_w_decrease = min(worst_w_decrease, min_w_increase)

        if eps_inf is not None:
            logger.info(f"k={k}: eps_inf={eps_inf:.6e}, eps_2={eps_2:.6e}, |xi|_inf={delta_c_inf:.3e}, min c={record.min_c:.4g}")
        else:
            logger.info(f"k={k}: |xi|_inf={delta_c_inf:.3e}, min c={record.min_c:.4g}")

        if config.init_mode == "from_above":
            if max_increase > MONOTONICITY_TOL * c0_scale:
                logger.warning(f"k={k}: coefficient increased by {max_increase:.3e} at some node (expected nonincreasing)")
            if min_w_increase < -MONOTONICITY_TOL * float(np.max(np.abs(sol_new.final))):
                logger.warning(f"k={k}: final state decreased by {-min_w_increase:.3e} at some node (expected nondecreasing)")

        if config.keep_iterates:
            iterates.append(c_new)
        c, sol = c_new, sol_new

        if config.stop_tol > 0 and delta_c_inf < config.stop_tol:
            converged = True
            logger.info(f"Converged after {k} iterations (|xi|_inf={delta_c_inf:.3e} < {config.stop_tol:.3e})")
            break

    if not config.keep_iterates and history:
        iterates.append(c)

    monotone = None
    if config.init_mode == "from_above" and history:
        w_scale = float(np.max(np.abs(sol.final)))
        monotone = (worst_increase <= MONOTONICITY_TOL * c0_scale
                    and worst_w_decrease >= -MONOTONICITY_TOL * w_scale)

    logger.info(f"Identification finished: {len(history)} iterations in {time.time() - start_time:.2f}s")
    return IdentificationResult(
        coefficient_iterates=iterates,
        history=history,
        converged=converged,
        final_solution=sol,
        init_mode=config.init_mode,
        initial_errors=initial_errors,
        zero_start_condition=zero_start_condition,
        worst_increase=float(worst_increase) if history else 0.0,
        worst_w_decrease=float(worst_w_decrease) if history else 0.0,
        monotone=monotone,
        iterates_complete=config.keep_iterates,
        psi_floor=psi_floor,
    )
