#!/usr/bin/env python3
"""
Command-line front end.

    python -m pycoefid forward       --config run.json [--out DIR] [--vtk]
    python -m pycoefid generate-data --config run.json [--out DIR] [--vtk]
    python -m pycoefid identify      --config run.json --psi DIR/psi.csv [--out DIR] [--vtk]
    python -m pycoefid study         --config run.json [--out DIR] [--workers N]

Exit status: 0 on success, 1 when a computation or output step fails, 2 on invalid
configuration or input. Nothing is written unless every validation step has passed.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from pycoefid.exceptions import (
    CoefficientError,
    ConfigError,
    DimensionMismatchError,
    MeshError,
    PsiFloorError,
)
from pycoefid.fem.assembly import assemble_operators
from pycoefid.fem.mesh import Mesh, build_rect_mesh
from pycoefid.models.config_model import RunConfig, load_run_config
from pycoefid.problems.library import check_source_conditions, generate_synthetic_data, sample_to_nodes
from pycoefid.solvers.forward import MonotonicityReport, TimeGrid, check_discrete_monotonicity, solve_forward
from pycoefid.solvers.identifier import (
    ZeroStartReport,
    coefficient_errors,
    identify,
    iterate_differences,
)
from pycoefid.study import run_time_step_study
from pycoefid.utils.field_io import (
    read_node_field,
    write_convergence_csv,
    write_node_field,
    write_study_csv,
    write_summary,
    write_vtk,
)
from pycoefid.utils.logger import logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2

# Failures of these types before the output stage are input errors
INPUT_ERRORS = (ConfigError, MeshError, DimensionMismatchError, CoefficientError, PsiFloorError, OSError, ValueError)

STAGE_WRITE = "write output"


class ForwardSummary(BaseModel):
    command: str = "forward"
    nodes: int
    steps: int
    tau: float
    theta: float
    u_min: float
    u_max: float
    dmp_hypotheses: bool
    dmp: MonotonicityReport
    snapshots: int = 0


class DataSummary(BaseModel):
    command: str = "generate-data"
    nodes: int
    steps: int
    data_tau: float
    data_theta: float
    psi_min: float
    psi_max: float
    source_conditions_hold: bool


class IdentifySummary(BaseModel):
    command: str = "identify"
    init_mode: str
    nodes: int
    steps: int
    tau: float
    iterations: int
    converged: bool
    psi_floor: float
    initial_eps_inf: Optional[float] = None
    initial_eps_2: Optional[float] = None
    final_eps_inf: Optional[float] = None
    final_eps_2: Optional[float] = None
    final_min_c: float
    final_max_c: float
    worst_increase: float
    worst_w_decrease: float
    monotone: Optional[bool] = None
    zero_start_condition: Optional[ZeroStartReport] = None


def _fail(stage: str, error: Exception) -> int:
    status = EXIT_INPUT if isinstance(error, INPUT_ERRORS) and stage != STAGE_WRITE else EXIT_FAILURE
    logger.error(f"Stage '{stage}' failed: {type(error).__name__}: {error}")
    return status


def _build_mesh(config: RunConfig) -> Mesh:
    return build_rect_mesh(config.domain.x_len, config.domain.y_len, config.mesh.nx, config.mesh.ny)


def cmd_forward(config: RunConfig, out_dir: Path, vtk: bool = False) -> int:
    """Solve the direct problem with the configured reaction coefficient (zero if absent)."""
    stage = "build mesh"
    try:
        mesh = _build_mesh(config)
        problem = config.to_problem()
        grid = TimeGrid.from_step(config.time.horizon, config.time.tau)
        c = sample_to_nodes(mesh, problem.c_true) if problem.c_true is not None else np.zeros(mesh.node_count)

        stage = "forward solve"
        check_source_conditions(problem.source)
        every = config.time.snapshot_every
        sol = solve_forward(mesh, problem.coeff, c, problem.source, grid, theta=config.time.theta,
                            keep_trajectory=config.time.keep_trajectory or every > 0,
                            rel_tol=config.time.solver.rel_tol, method=config.time.solver.method)
        report = check_discrete_monotonicity(sol)
        logger.info(f"u(T): min={sol.final.min():.6g}, max={sol.final.max():.6g}")

        stage = STAGE_WRITE
        write_node_field(out_dir / "u_final.csv", mesh, sol.final)
        snapshots = 0
        if every > 0:
            for n in range(0, grid.steps + 1, every):
                write_node_field(out_dir / f"u_step_{n:05d}.csv", mesh, sol.trajectory[n])
                snapshots += 1
        if vtk:
            write_vtk(out_dir / "forward.vtk", mesh, {"u": sol.final, "c": c})
        write_summary(out_dir / "summary.json", ForwardSummary(
            nodes=mesh.node_count,
            steps=grid.steps,
            tau=grid.tau,
            theta=sol.theta,
            u_min=float(sol.final.min()),
            u_max=float(sol.final.max()),
            dmp_hypotheses=sol.dmp_hypotheses,
            dmp=report,
            snapshots=snapshots,
        ))
        logger.info(f"Forward results written to {out_dir}")
        return EXIT_OK
    except Exception as e:
        return _fail(stage, e)


def cmd_generate_data(config: RunConfig, out_dir: Path, vtk: bool = False) -> int:
    """Generate the final-time observation psi from the configured true coefficient."""
    stage = "validate input"
    try:
        problem = config.to_problem()
        if problem.c_true is None:
            raise ConfigError("generate-data needs coefficients.reaction (the true coefficient)",
                              keys=["coefficients.reaction"])
        mesh = _build_mesh(config)
        data_tau = config.time.resolved_data_tau
        grid = TimeGrid.from_step(problem.horizon, data_tau)

        stage = "generate data"
        conditions_hold = not problem.source.condition_violations()
        psi = generate_synthetic_data(problem, mesh, data_tau, theta=config.time.data_theta,
                                      rel_tol=config.time.solver.rel_tol, method=config.time.solver.method)

        stage = STAGE_WRITE
        write_node_field(out_dir / "psi.csv", mesh, psi)
        if vtk:
            write_vtk(out_dir / "psi.vtk", mesh, {"psi": psi, "c_true": sample_to_nodes(mesh, problem.c_true)})
        write_summary(out_dir / "summary.json", DataSummary(
            nodes=mesh.node_count,
            steps=grid.steps,
            data_tau=data_tau,
            data_theta=config.time.data_theta,
            psi_min=float(psi.min()),
            psi_max=float(psi.max()),
            source_conditions_hold=conditions_hold,
        ))
        logger.info(f"Final-time data written to {out_dir / 'psi.csv'}")
        return EXIT_OK
    except Exception as e:
        return _fail(stage, e)


def cmd_identify(config: RunConfig, psi_path: Path, out_dir: Path, vtk: bool = False) -> int:
    """Run the coefficient identification on the data in ``psi_path``."""
    stage = "build mesh"
    try:
        mesh = _build_mesh(config)
        problem = config.to_problem()
        grid = TimeGrid.from_step(problem.horizon, config.time.tau)

        stage = "read psi"
        psi = read_node_field(psi_path, mesh)

        stage = "identify"
        operators = assemble_operators(mesh, problem.coeff)
        result = identify(problem, psi, mesh, grid, config=config.identification, operators=operators,
                          rel_tol=config.time.solver.rel_tol, method=config.time.solver.method)

        stage = STAGE_WRITE
        iterates = result.coefficient_iterates
        indices = list(range(len(iterates))) if result.iterates_complete else [0, result.iterations][:len(iterates)]
        for k, c_k in zip(indices, iterates):
            write_node_field(out_dir / f"c_{k:03d}.csv", mesh, c_k)
        if result.iterates_complete:
            for k, xi in enumerate(iterate_differences(result), start=1):
                write_node_field(out_dir / f"delta_c{k:03d}.csv", mesh, xi)

        c_true = sample_to_nodes(mesh, problem.c_true) if problem.c_true is not None else None
        if c_true is not None:
            for k, delta in zip(indices, coefficient_errors(result, c_true)):
                write_node_field(out_dir / f"error_c{k:03d}.csv", mesh, delta)

        eps_inf_0, eps_2_0 = result.initial_errors or (None, None)
        initial_row = (eps_inf_0, eps_2_0, float(iterates[0].min()))
        write_convergence_csv(out_dir / "convergence.csv", result.history, initial_row=initial_row)
        write_node_field(out_dir / "final_solution.csv", mesh, result.final_solution.final)

        if vtk:
            fields = {"c": result.final_coefficient, "psi": psi, "w_final": result.final_solution.final}
            if c_true is not None:
                fields["c_true"] = c_true
            write_vtk(out_dir / "identify.vtk", mesh, fields)

        last = result.history[-1] if result.history else None
        write_summary(out_dir / "summary.json", IdentifySummary(
            init_mode=result.init_mode,
            nodes=mesh.node_count,
            steps=grid.steps,
            tau=grid.tau,
            iterations=result.iterations,
            converged=result.converged,
            psi_floor=result.psi_floor,
            initial_eps_inf=eps_inf_0,
            initial_eps_2=eps_2_0,
            final_eps_inf=last.eps_inf if last else None,
            final_eps_2=last.eps_2 if last else None,
            final_min_c=float(result.final_coefficient.min()),
            final_max_c=float(result.final_coefficient.max()),
            worst_increase=result.worst_increase,
            worst_w_decrease=result.worst_w_decrease,
            monotone=result.monotone,
            zero_start_condition=result.zero_start_condition,
        ))
        logger.info(f"Identification results written to {out_dir}")
        return EXIT_OK
    except Exception as e:
        return _fail(stage, e)


def cmd_study(config: RunConfig, out_dir: Path, max_workers: int = 4) -> int:
    """Repeat the identification for every ``time.study_taus`` step against one data set."""
    stage = "validate input"
    try:
        problem = config.to_problem()
        if problem.c_true is None:
            raise ConfigError("study needs coefficients.reaction (the true coefficient)",
                              keys=["coefficients.reaction"])
        undivided = config.time.undivided_study_taus()
        if undivided:
            raise ConfigError(f"study steps {undivided} do not divide the horizon {config.time.horizon}",
                              keys=["time.study_taus"])
        mesh = _build_mesh(config)

        stage = "time-step study"
        report = run_time_step_study(problem, mesh, config.time.study_taus, config.time.resolved_data_tau,
                                     data_theta=config.time.data_theta, config=config.identification,
                                     max_workers=max_workers, rel_tol=config.time.solver.rel_tol,
                                     method=config.time.solver.method)

        stage = STAGE_WRITE
        write_study_csv(out_dir / "study.csv", report.runs)
        write_summary(out_dir / "summary.json", report)
        logger.info(f"Study results written to {out_dir}")
        return EXIT_FAILURE if report.errors else EXIT_OK
    except Exception as e:
        return _fail(stage, e)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pycoefid",
        description="Identify the reaction coefficient of a parabolic equation from final-time data",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, required=True, help="JSON run configuration")
    common.add_argument("--out", type=str, help="Output directory (default: output.directory from the config)")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", required=True)
    forward = subparsers.add_parser("forward", parents=[common], help="Solve the direct problem")
    forward.add_argument("--vtk", action="store_true", help="Also write a legacy VTK file")
    data = subparsers.add_parser("generate-data", parents=[common], help="Generate final-time data psi")
    data.add_argument("--vtk", action="store_true", help="Also write a legacy VTK file")
    ident = subparsers.add_parser("identify", parents=[common], help="Identify the reaction coefficient")
    ident.add_argument("--psi", type=str, required=True, help="Final-time data written by generate-data")
    ident.add_argument("--vtk", action="store_true", help="Also write a legacy VTK file")
    study = subparsers.add_parser("study", parents=[common], help="Time-step refinement study")
    study.add_argument("--workers", type=int, default=4, help="Number of concurrent identification runs")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments and run one command; returns the process exit status."""
    args = build_parser().parse_args(argv)
    if args.debug:
        logger.setLevel(logging.DEBUG)
        logger.debug("Debug logging enabled")

    try:
        config = load_run_config(args.config)
    except ConfigError as e:
        logger.error(f"Stage 'load config' failed: {e}")
        return EXIT_INPUT

    out_dir = Path(args.out or config.output.directory)
    vtk = getattr(args, "vtk", False) or config.output.vtk
    logger.info(f"Running '{args.command}' with {args.config}, output to {out_dir}")

    if args.command == "forward":
        return cmd_forward(config, out_dir, vtk=vtk)
    if args.command == "generate-data":
        return cmd_generate_data(config, out_dir, vtk=vtk)
    if args.command == "identify":
        return cmd_identify(config, Path(args.psi), out_dir, vtk=vtk)
    return cmd_study(config, out_dir, max_workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
