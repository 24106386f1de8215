import numpy as np
import pytest

from pycoefid.exceptions import CoefficientError, DimensionMismatchError
from pycoefid.fem.assembly import (
    apply_elliptic,
    assemble_consistent_mass,
    assemble_lumped_mass,
    assemble_operators,
    assemble_stiffness,
    element_stiffness,
    lumped_load,
    weighted_lumped_mass,
)
from pycoefid.fem.mesh import boundary_edge_lengths, build_rect_mesh
from pycoefid.models.problem_model import CircleRegion, CoefficientSpec, RegionCoefficient


def dense_stiffness(mesh, coeff):
    """Element-by-element dense assembly."""
    n = mesh.node_count
    K = np.zeros((n, n))
    for tri in mesh.triangles:
        vertices = mesh.nodes[tri]
        k = coeff.diffusion.evaluate(vertices.mean(axis=0)[None])[0]
        K[np.ix_(tri, tri)] += element_stiffness(vertices, k)
    for edge in mesh.boundary_edges:
        a, b = mesh.nodes[edge]
        mu = coeff.robin.evaluate(((a + b) / 2)[None])[0]
        h = np.linalg.norm(b - a)
        K[np.ix_(edge, edge)] += mu * h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return K


def test_reference_triangle_stiffness():
    K = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    np.testing.assert_allclose(K, expected, rtol=0, atol=1e-13)


def test_equilateral_triangle_stiffness():
    K = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]], k=2.0)
    # Off-diagonal entries are -k/2 cot(60 degrees)
    off = -1.0 / np.sqrt(3.0)
    expected = np.array([[-2 * off, off, off], [off, -2 * off, off], [off, off, -2 * off]])
    np.testing.assert_allclose(K, expected, rtol=0, atol=1e-13)


def test_element_stiffness_is_scale_invariant():
    small = element_stiffness([[0.0, 0.0], [0.02, 0.0], [0.02, 0.02]])
    large = element_stiffness([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(small, large, rtol=0, atol=1e-13)


def test_lumped_mass_equals_consistent_row_sums():
    mesh = build_rect_mesh(1.5, 1.0, 6, 5)
    m = assemble_lumped_mass(mesh)
    row_sums = np.asarray(assemble_consistent_mass(mesh).sum(axis=1)).ravel()
    np.testing.assert_allclose(m, row_sums, rtol=1e-13)
    assert m.sum() == pytest.approx(1.5, rel=1e-13)


def test_lumped_mass_values_on_structured_mesh():
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    h2 = 1.0 / 16.0
    m = assemble_lumped_mass(mesh)
    assert m[0] == pytest.approx(h2 / 3.0)      # two triangles at (0, 0)
    assert m[4] == pytest.approx(h2 / 6.0)      # one triangle at (1, 0)
    assert m[6] == pytest.approx(h2)            # interior node, six triangles


@pytest.mark.parametrize("coeff", [
    CoefficientSpec(diffusion=RegionCoefficient.constant(2.0), robin=RegionCoefficient.constant(3.0)),
    CoefficientSpec(
        diffusion=RegionCoefficient(background=1.0, regions=[CircleRegion(center=(0.5, 0.5), radius=0.3, value=4.0)]),
        robin=RegionCoefficient.constant(10.0),
    ),
])
def test_stiffness_matches_dense_assembly(coeff):
    mesh = build_rect_mesh(1.0, 1.0, 5, 4)
    K = assemble_stiffness(mesh, coeff)
    expected = dense_stiffness(mesh, coeff)
    np.testing.assert_allclose(K.toarray(), expected, rtol=0, atol=1e-13 * np.abs(expected).max())
    assert abs(K - K.T).max() <= 1e-14 * abs(K).max()


def test_stiffness_annihilates_constants_without_robin_term():
    mesh = build_rect_mesh(1.0, 2.0, 4, 6)
    K = assemble_stiffness(mesh, CoefficientSpec())
    np.testing.assert_allclose(K @ np.ones(mesh.node_count), 0.0, atol=1e-13)


def test_robin_term_integrates_mu_over_the_boundary():
    mesh = build_rect_mesh(1.0, 1.0, 3, 3)
    K = assemble_stiffness(mesh, CoefficientSpec(robin=RegionCoefficient.constant(10.0)))
    ones = np.ones(mesh.node_count)
    assert ones @ (K @ ones) == pytest.approx(10.0 * boundary_edge_lengths(mesh).sum(), rel=1e-13)


def test_stiffness_rejects_nonpositive_diffusion():
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    bad = CoefficientSpec(diffusion=RegionCoefficient(
        background=1.0, regions=[CircleRegion(center=(0.5, 0.5), radius=0.2, value=-1.0)]))
    with pytest.raises(CoefficientError, match="Diffusion"):
        assemble_stiffness(mesh, bad)


def test_stiffness_rejects_negative_robin():
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    with pytest.raises(CoefficientError, match="Robin"):
        assemble_stiffness(mesh, CoefficientSpec(robin=RegionCoefficient.constant(-1.0)))


def test_apply_elliptic_of_linear_function_vanishes_inside():
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    ops = assemble_operators(mesh, CoefficientSpec())
    v = mesh.nodes[:, 0].copy()
    Av = apply_elliptic(mesh, ops.stiffness, ops.lumped_mass, v)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    interior = (x > 0) & (x < 1) & (y > 0) & (y < 1)
    np.testing.assert_allclose(Av[interior], 0.0, atol=1e-12)


def test_apply_elliptic_dimension_check():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    ops = assemble_operators(mesh, CoefficientSpec())
    with pytest.raises(DimensionMismatchError):
        apply_elliptic(mesh, ops.stiffness, ops.lumped_mass, np.ones(4))


def test_lumped_reaction_and_load():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    m = assemble_lumped_mass(mesh)
    c = np.arange(mesh.node_count, dtype=float)
    np.testing.assert_allclose(weighted_lumped_mass(mesh, c), c * m)
    np.testing.assert_allclose(lumped_load(mesh, 2.0 * np.ones(mesh.node_count), m), 2.0 * m)


@pytest.mark.parametrize("nx,ny,x_len,y_len", [(4, 4, 1.0, 1.0), (6, 3, 1.0, 1.0), (5, 7, 2.0, 0.5)])
@pytest.mark.parametrize("k", [1.0, 3.5])
def test_diffusion_stiffness_has_nonpositive_off_diagonal(nx, ny, x_len, y_len, k):
    mesh = build_rect_mesh(x_len, y_len, nx, ny)
    K = assemble_stiffness(mesh, CoefficientSpec(diffusion=RegionCoefficient.constant(k))).toarray()
    off_diagonal = K - np.diag(np.diag(K))
    assert off_diagonal.max() <= 1e-13


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("robin", [
    RegionCoefficient.constant(10.0),
    RegionCoefficient(background=0.0, regions=[CircleRegion(center=(0.0, 0.0), radius=0.4, value=1.0)]),
])
def test_stiffness_with_robin_term_is_positive_definite(n, robin):
    mesh = build_rect_mesh(1.0, 1.0, n, n)
    coeff = CoefficientSpec(robin=robin)
    K = dense_stiffness(mesh, coeff)
    np.testing.assert_allclose(assemble_stiffness(mesh, coeff).toarray(), K, rtol=0, atol=1e-13 * np.abs(K).max())
    assert np.linalg.eigvalsh(K).min() > 0.0
