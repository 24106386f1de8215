from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence
import time

from pydantic import BaseModel, Field

from pycoefid.fem.assembly import FemOperators, assemble_operators
from pycoefid.fem.mesh import Mesh
from pycoefid.models.config_model import IdentificationConfig
from pycoefid.models.problem_model import ProblemSpec
from pycoefid.problems.library import generate_synthetic_data
from pycoefid.solvers.forward import TimeGrid
from pycoefid.solvers.identifier import identify
from pycoefid.solvers.linalg import DEFAULT_REL_TOL
from pycoefid.utils.logger import logger


class StudyRun(BaseModel):
    """Identification result for one time step."""
    tau: float
    steps: int
    iterations: int
    final_eps_inf: float
    final_eps_2: float
    eps_inf_history: List[float]
    eps_2_history: List[float]


class StudyReport(BaseModel):
    """
    Outcome of a time-step refinement study.

    ``runs`` is ordered from the coarsest to the finest step. ``eps_2_decreasing`` tells
    whether the final eps_2 drops strictly each time tau is refined.
    """
    data_tau: float
    data_theta: float
    init_mode: str
    runs: List[StudyRun] = Field(default_factory=list)
    eps_2_decreasing: bool = False
    errors: List[str] = Field(default_factory=list)


def _run_single_step(problem: ProblemSpec, mesh: Mesh, psi, tau: float, config: IdentificationConfig,
                     operators: FemOperators, rel_tol: float, method: str) -> Dict:
    """Identify with one time step; never raises, failures come back in the result dict."""
    try:
        grid = TimeGrid.from_step(problem.horizon, tau)
        result = identify(problem, psi, mesh, grid, config=config, operators=operators,
                          rel_tol=rel_tol, method=method)
        eps_inf = [result.initial_errors[0]] + [r.eps_inf for r in result.history]
        eps_2 = [result.initial_errors[1]] + [r.eps_2 for r in result.history]
        run = StudyRun(
            tau=tau,
            steps=grid.steps,
            iterations=result.iterations,
            final_eps_inf=eps_inf[-1],
            final_eps_2=eps_2[-1],
            eps_inf_history=eps_inf,
            eps_2_history=eps_2,
        )
        return {"success": True, "run": run}
    except Exception as e:
        return {"success": False, "error": f"tau={tau}: {type(e).__name__}: {e}"}


def run_time_step_study(
    problem: ProblemSpec,
    mesh: Mesh,
    taus: Sequence[float],
    data_tau: float,
    data_theta: float = 0.5,
    config: Optional[IdentificationConfig] = None,
    max_workers: int = 4,
    rel_tol: float = DEFAULT_REL_TOL,
    method: str = "direct",
) -> StudyReport:
    """
    Repeat the identification for several time steps against one fixed data set.

    Args:
        problem: Problem with ``c_true`` set
        mesh: Spatial mesh shared by data generation and identification
        taus: Identification time steps
        data_tau: Time step of the data run
        data_theta: Scheme of the data run, 1 or 1/2
        config: Identification settings used for every step
        max_workers: Thread pool size

    Returns:
        StudyReport; runs that failed are listed in ``errors``

    Raises:
        ValueError: If the problem has no true coefficient
        SolverConvergenceError: If the data run fails
    """
    start_time = time.time()
    config = config or IdentificationConfig()
    if problem.c_true is None:
        raise ValueError("A time-step study needs a true reaction coefficient (c_true)")

    operators = assemble_operators(mesh, problem.coeff)
    psi = generate_synthetic_data(problem, mesh, data_tau, theta=data_theta, operators=operators,
                                  rel_tol=rel_tol, method=method)

    report = StudyReport(data_tau=data_tau, data_theta=data_theta, init_mode=config.init_mode)
    runs: List[StudyRun] = []

    logger.info(f"Starting time-step study over {len(taus)} steps with {max_workers} workers")
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(_run_single_step, problem, mesh, psi, tau, config, operators, rel_tol, method): tau
            for tau in taus
        }
        for future in as_completed(futures):
            tau = futures[future]
            try:
                result = future.result()
                if result["success"]:
                    runs.append(result["run"])
                    logger.info(f"tau={tau:.3e}: final eps_inf={result['run'].final_eps_inf:.6e}, "
                                f"eps_2={result['run'].final_eps_2:.6e}")
                else:
                    logger.error(f"Study run failed: {result['error']}")
                    report.errors.append(result["error"])
            except Exception as e:
                logger.error(f"Error in future for tau={tau}: {str(e)}")
                report.errors.append(f"tau={tau}: Executor error: {str(e)}")

    runs.sort(key=lambda run: run.tau, reverse=True)
    report.runs = runs
    report.errors.sort()
    report.eps_2_decreasing = len(runs) > 1 and all(
        finer.final_eps_2 < coarser.final_eps_2 for coarser, finer in zip(runs, runs[1:])
    )

    logger.info(f"Finished time-step study: {len(runs)} runs, {len(report.errors)} failures, "
                f"eps_2 decreasing: {report.eps_2_decreasing}, {time.time() - start_time:.2f}s")
    return report
