"""
P1 finite-element operators on triangular meshes.

The stiffness matrix K represents the bilinear form
    a(u, v) = int_Omega k grad u . grad v dx + int_dOmega mu u v ds,
and all mass-type terms (time derivative, reaction, load) use the lumped mass
m_i = sum over triangles containing node i of area / 3.
"""
import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from pycoefid.exceptions import CoefficientError, MeshError, PyCoefIdError
from pycoefid.fem.mesh import Mesh, boundary_edge_lengths, signed_areas
from pycoefid.models.problem_model import CoefficientSpec
from pycoefid.solvers.linalg import SparseMatrix, from_coo
from pycoefid.utils.validation import as_node_field

logger = logging.getLogger(__name__)

# Nodal values u_i = u(x_i) of a P1 function, one per mesh node
NodeField = npt.NDArray[np.float64]

# Exact integral of products of P1 basis functions over a segment of length h, divided by h
_EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
# Same over a triangle of area A, divided by A
_TRIANGLE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Stiffness matrix and lumped mass of one mesh/coefficient pair, assembled once and shared."""
    mesh: Mesh
    stiffness: SparseMatrix
    lumped_mass: np.ndarray


def _basis_gradients(points: np.ndarray) -> np.ndarray:
    """
    Gradients of the three barycentric functions on each triangle.

    Args:
        points: (T, 3, 2) vertex coordinates, counterclockwise

    Returns:
        (T, 3, 2) array; entry [t, i] is grad(lambda_i) on triangle t
    """
    two_area = ((points[:, 1, 0] - points[:, 0, 0]) * (points[:, 2, 1] - points[:, 0, 1])
                - (points[:, 1, 1] - points[:, 0, 1]) * (points[:, 2, 0] - points[:, 0, 0]))
    grads = np.empty_like(points)
    for i in range(3):
        e = points[:, (i + 2) % 3] - points[:, (i + 1) % 3]
        grads[:, i, 0] = -e[:, 1] / two_area
        grads[:, i, 1] = e[:, 0] / two_area
    return grads


def local_stiffness(points: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Element stiffness matrices k_t * area_t * G_t G_t^T for a stack of triangles."""
    points = np.asarray(points, dtype=float).reshape(-1, 3, 2)
    k = np.broadcast_to(np.asarray(k, dtype=float), (points.shape[0],))
    grads = _basis_gradients(points)
    e1 = points[:, 1] - points[:, 0]
    e2 = points[:, 2] - points[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return (k * area)[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)


def element_stiffness(vertices, k: float = 1.0) -> np.ndarray:
    """Stiffness matrix of a single counterclockwise triangle with constant diffusion ``k``."""
    return local_stiffness(np.asarray(vertices, dtype=float)[None], k)[0]


def assemble_stiffness(mesh: Mesh, coeff: CoefficientSpec) -> SparseMatrix:
    """
    Assemble K with K[i, j] = a(chi_j, chi_i).

    k is evaluated at triangle centroids and mu at boundary-edge midpoints; the boundary
    term is integrated exactly for P1 functions.

    Args:
        mesh: Triangulation
        coeff: Diffusion and Robin coefficients

    Returns:
        Symmetric positive semidefinite CSR matrix

    Raises:
        CoefficientError: If k <= 0 at a centroid or mu < 0 at an edge midpoint
    """
    points = mesh.nodes[mesh.triangles]
    centroids = points.mean(axis=1)
    k = coeff.diffusion.evaluate(centroids)
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        bad = int(np.flatnonzero(~(k > 0))[0])
        raise CoefficientError(f"Diffusion coefficient k = {k[bad]} is not positive at the centroid of triangle {bad}")

    K_local = local_stiffness(points, k)
    tris = mesh.triangles
    rows = [np.repeat(tris, 3, axis=1).ravel()]
    cols = [np.tile(tris, (1, 3)).ravel()]
    vals = [K_local.ravel()]

    edges = mesh.boundary_edges
    if edges.shape[0]:
        midpoints = mesh.nodes[edges].mean(axis=1)
        mu = coeff.robin.evaluate(midpoints)
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            bad = int(np.flatnonzero(~(mu >= 0))[0])
            raise CoefficientError(f"Robin coefficient mu = {mu[bad]} is negative at the midpoint of boundary edge {bad}")
        lengths = boundary_edge_lengths(mesh)
        B_local = (mu * lengths)[:, None, None] * _EDGE_MASS[None]
        rows.append(np.repeat(edges, 2, axis=1).ravel())
        cols.append(np.tile(edges, (1, 2)).ravel())
        vals.append(B_local.ravel())

    K = from_coo(mesh.node_count, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    logger.debug(f"Assembled stiffness: {mesh.node_count} unknowns, {K.nnz} nonzeros")
    return K


def assemble_lumped_mass(mesh: Mesh) -> np.ndarray:
    """
    Row-sum lumped mass, m_i = sum of area/3 over triangles containing node i.

    Raises:
        MeshError: If some node belongs to no triangle
    """
    areas = np.abs(signed_areas(mesh))
    m = np.bincount(mesh.triangles.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=mesh.node_count)
    if np.any(m <= 0):
        raise MeshError(f"Node {int(np.flatnonzero(m <= 0)[0])} belongs to no triangle")
    return m


def assemble_consistent_mass(mesh: Mesh) -> SparseMatrix:
    """Consistent P1 mass matrix (exact integration of basis products)."""
    areas = np.abs(signed_areas(mesh))
    M_local = areas[:, None, None] * _TRIANGLE_MASS[None]
    tris = mesh.triangles
    return from_coo(mesh.node_count, np.repeat(tris, 3, axis=1).ravel(), np.tile(tris, (1, 3)).ravel(), M_local.ravel())


def assemble_operators(mesh: Mesh, coeff: CoefficientSpec) -> FemOperators:
    """Assemble stiffness and lumped mass together."""
    return FemOperators(mesh=mesh, stiffness=assemble_stiffness(mesh, coeff), lumped_mass=assemble_lumped_mass(mesh))


def weighted_lumped_mass(mesh: Mesh, c: NodeField, m: np.ndarray = None) -> np.ndarray:
    """Lumped reaction term: D_i = c_i * m_i."""
    c = as_node_field("c", c, mesh.node_count)
    if m is None:
        m = assemble_lumped_mass(mesh)
    return c * m


def lumped_load(mesh: Mesh, f_values: NodeField, m: np.ndarray = None) -> np.ndarray:
    """Lumped load vector: F_i = m_i * f(x_i)."""
    f_values = as_node_field("f_values", f_values, mesh.node_count)
    if m is None:
        m = assemble_lumped_mass(mesh)
    return m * f_values


def apply_elliptic(mesh: Mesh, K: SparseMatrix, m: np.ndarray, v: NodeField) -> NodeField:
    """
    Nodal representative of the elliptic operator applied to ``v``: (K v)_i / m_i.

    This is the lumped-mass Riesz representative of a(v, .).
    """
    v = as_node_field("v", v, mesh.node_count)
    m = as_node_field("m", m, mesh.node_count)
    if np.any(m <= 0):
        raise PyCoefIdError(f"Internal error: lumped mass vanishes at node {int(np.flatnonzero(m <= 0)[0])}")
    return (K @ v) / m
