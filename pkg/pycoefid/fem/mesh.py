"""
Triangular meshes of polygonal domains and the structured rectangle generator.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from pycoefid.exceptions import MeshError

logger = logging.getLogger(__name__)

# Angles are compared against a right angle with this slack (radians)
NONOBTUSE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Conforming triangulation with counterclockwise triangles and an oriented boundary.

    Attributes:
        nodes: (M, 2) node coordinates
        triangles: (T, 3) node indices per triangle, counterclockwise
        boundary_edges: (B, 2) node indices per boundary edge, oriented along the boundary
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        boundary_edges = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        for array in (nodes, triangles, boundary_edges):
            array.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", triangles)
        object.__setattr__(self, "boundary_edges", boundary_edges)

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    def edge_counts(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Count how many triangles share each undirected edge.

        Returns:
            Tuple of (edges, counts): unique edges as sorted node pairs and the number of
            triangles containing each of them
        """
        tris = self.triangles
        all_edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        all_edges.sort(axis=1)
        edges, counts = np.unique(all_edges, axis=0, return_counts=True)
        return edges, counts

    def validate(self) -> None:
        """
        Check the triangulation invariants.

        Raises:
            MeshError: On out-of-range indices, non-positive triangle areas, or a boundary
                edge list that does not match the edges owned by exactly one triangle
        """
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= self.node_count):
            raise MeshError("Triangle references a node index outside the node list")

        areas = signed_areas(self)
        if np.any(areas <= 0):
            bad = int(np.flatnonzero(areas <= 0)[0])
            raise MeshError(f"Triangle {bad} has non-positive signed area {areas[bad]:.3e} (not counterclockwise)")

        edges, counts = self.edge_counts()
        if np.any(counts > 2):
            raise MeshError("Non-conforming triangulation: an edge is shared by more than two triangles")

        boundary = np.sort(self.boundary_edges, axis=1)
        expected = edges[counts == 1]
        unique_boundary = np.unique(boundary, axis=0)
        if unique_boundary.shape[0] != boundary.shape[0]:
            raise MeshError("Boundary edge listed more than once")
        if unique_boundary.shape != expected.shape or not np.array_equal(unique_boundary, expected):
            raise MeshError("Boundary edges do not match the edges owned by exactly one triangle")


def build_rect_mesh(x_len: float, y_len: float, nx: int, ny: int) -> Mesh:
    """
    Build a uniform triangulation of the rectangle [0, x_len] x [0, y_len].

    Each of the nx*ny cells is split into two right triangles along its lower-left to
    upper-right diagonal. Nodes are numbered row by row.

    Args:
        x_len: Extent in x1
        y_len: Extent in x2
        nx: Number of intervals along x1
        ny: Number of intervals along x2

    Returns:
        Mesh with (nx+1)(ny+1) nodes, 2*nx*ny triangles and 2(nx+ny) boundary edges
    """
    if not (x_len > 0 and y_len > 0):
        raise MeshError(f"Rectangle extents must be positive, got ({x_len}, {y_len})")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"Interval counts must be positive integers, got ({nx}, {ny})")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, x_len, nx + 1)
    ys = np.linspace(0.0, y_len, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    n00 = idx(I, J).ravel()
    n10 = idx(I + 1, J).ravel()
    n01 = idx(I, J + 1).ravel()
    n11 = idx(I + 1, J + 1).ravel()
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    # Counterclockwise cycle: bottom, right, top, left
    i_range = np.arange(nx)
    j_range = np.arange(ny)
    bottom = np.column_stack([idx(i_range, 0), idx(i_range + 1, 0)])
    right = np.column_stack([idx(nx, j_range), idx(nx, j_range + 1)])
    top = np.column_stack([idx(i_range[::-1] + 1, ny), idx(i_range[::-1], ny)])
    left = np.column_stack([idx(0, j_range[::-1] + 1), idx(0, j_range[::-1])])
    boundary_edges = np.concatenate([bottom, right, top, left])

    mesh = Mesh(nodes=nodes, triangles=triangles, boundary_edges=boundary_edges)
    mesh.validate()
    logger.debug(f"Built {nx}x{ny} rectangle mesh: {mesh.node_count} nodes, {mesh.triangle_count} triangles")
    return mesh


def signed_areas(mesh: Mesh) -> np.ndarray:
    """Signed area of every triangle; positive for counterclockwise orientation."""
    p = mesh.nodes[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Area of every triangle."""
    return np.abs(signed_areas(mesh))


def triangle_area(mesh: Mesh, t: int) -> float:
    """Area of triangle ``t``: one half of the absolute cross product of two edge vectors."""
    if not 0 <= t < mesh.triangle_count:
        raise IndexError(f"Triangle index {t} out of range for mesh with {mesh.triangle_count} triangles")
    p0, p1, p2 = mesh.nodes[mesh.triangles[t]]
    e1 = p1 - p0
    e2 = p2 - p0
    return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])


def boundary_edge_lengths(mesh: Mesh) -> np.ndarray:
    p = mesh.nodes[mesh.boundary_edges]
    return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)


def triangle_max_angles(mesh: Mesh) -> np.ndarray:
    """Largest interior angle of every triangle, in radians."""
    p = mesh.nodes[mesh.triangles]
    angles = np.empty((mesh.triangle_count, 3))
    for corner in range(3):
        a = p[:, (corner + 1) % 3] - p[:, corner]
        b = p[:, (corner + 2) % 3] - p[:, corner]
        cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles[:, corner] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles.max(axis=1)


def is_nonobtuse(mesh: Mesh, tol: float = NONOBTUSE_TOL) -> bool:
    """True when no triangle has an angle larger than a right angle (up to ``tol``)."""
    return bool(np.all(triangle_max_angles(mesh) <= 0.5 * np.pi + tol))
