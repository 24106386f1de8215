"""
File output for nodal fields, convergence histories and run summaries.

Field files are CSV with header ``x1,x2,value`` and one row per node in mesh order; values
are written with 17 significant digits so doubles round-trip exactly.
"""
import logging
import math
import os
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from pydantic import BaseModel

from pycoefid.exceptions import DimensionMismatchError
from pycoefid.fem.mesh import Mesh

logger = logging.getLogger(__name__)

FIELD_HEADER = "x1,x2,value"
CONVERGENCE_HEADER = "k,eps_inf,eps_2,delta_c_inf,min_c,max_increase"
STUDY_HEADER = "tau,k,eps_inf,eps_2"

# VTK cell type of a linear triangle
VTK_TRIANGLE = 5

PathLike = Union[str, os.PathLike]


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return "%.17g" % value


def write_node_field(path: PathLike, mesh: Mesh, values: np.ndarray) -> Path:
    """Write a nodal field as ``x1,x2,value`` CSV."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.node_count,):
        raise DimensionMismatchError(f"Field of shape {values.shape} does not match {mesh.node_count} mesh nodes")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [FIELD_HEADER]
    lines.extend(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}" for (x, y), v in zip(mesh.nodes, values))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_node_field(path: PathLike, mesh: Optional[Mesh] = None, coord_tol: float = 1e-9) -> np.ndarray:
    """
    Read a field written by :func:`write_node_field`.

    Args:
        path: CSV file
        mesh: When given, the node count and coordinates must match this mesh
        coord_tol: Allowed coordinate mismatch

    Raises:
        DimensionMismatchError: On a node-count or coordinate mismatch
        ValueError: On a malformed file
    """
    path = Path(path)
    with path.open() as f:
        header = f.readline().strip()
    if header != FIELD_HEADER:
        raise ValueError(f"{path}: expected header '{FIELD_HEADER}', got '{header}'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {data.shape[1]}")
    if mesh is not None:
        if data.shape[0] != mesh.node_count:
            raise DimensionMismatchError(f"{path}: {data.shape[0]} records, mesh has {mesh.node_count} nodes")
        if np.max(np.abs(data[:, :2] - mesh.nodes)) > coord_tol:
            raise DimensionMismatchError(f"{path}: node coordinates do not match the mesh")
    return data[:, 2].copy()


def write_convergence_csv(path: PathLike, records, initial_row=None) -> Path:
    """
    Write the convergence history ``k,eps_inf,eps_2,delta_c_inf,min_c,max_increase``.

    Args:
        path: Output file
        records: Iteration records (k >= 1)
        initial_row: Optional (eps_inf, eps_2, min_c) of c^0, written as the k = 0 row with
            nan in the columns that need a previous iterate
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CONVERGENCE_HEADER]
    if initial_row is not None:
        eps_inf, eps_2, min_c = initial_row
        lines.append(f"0,{_fmt(eps_inf)},{_fmt(eps_2)},nan,{_fmt(min_c)},nan")
    for r in records:
        lines.append(",".join([str(r.k), _fmt(r.eps_inf), _fmt(r.eps_2), _fmt(r.delta_c_inf),
                               _fmt(r.min_c), _fmt(r.max_increase)]))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_vtk(path: PathLike, mesh: Mesh, fields: Dict[str, np.ndarray], title: str = "pycoefid output") -> Path:
    """
    Write a legacy ASCII VTK unstructured grid with nodal scalars.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_points = mesh.node_count
    n_cells = mesh.triangle_count

    lines = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n_points} double"]
    lines.extend(f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.nodes)
    lines.append(f"CELLS {n_cells} {4 * n_cells}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    lines.append(f"CELL_TYPES {n_cells}")
    lines.extend(str(VTK_TRIANGLE) for _ in range(n_cells))
    lines.append(f"POINT_DATA {n_points}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (n_points,):
            raise DimensionMismatchError(f"VTK field '{name}' has shape {values.shape}, expected ({n_points},)")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in values)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_summary(path: PathLike, summary: BaseModel) -> Path:
    """Write a pydantic summary model as indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n")
    return path


def write_study_csv(path: PathLike, runs) -> Path:
    """Write ``tau,k,eps_inf,eps_2`` rows, one per iteration of every study run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [STUDY_HEADER]
    for run in runs:
        for k, (eps_inf, eps_2) in enumerate(zip(run.eps_inf_history, run.eps_2_history)):
            lines.append(f"{_fmt(run.tau)},{k},{_fmt(eps_inf)},{_fmt(eps_2)}")
    path.write_text("\n".join(lines) + "\n")
    return path
