import numpy as np
import pytest

from pycoefid.fem.assembly import assemble_operators
from pycoefid.fem.mesh import build_rect_mesh
from pycoefid.models.problem_model import CoefficientSpec, RegionCoefficient, SourceSpec
from pycoefid.problems.library import sample_to_nodes
from pycoefid.solvers.forward import TimeGrid, check_discrete_monotonicity, solve_forward, step_implicit


def ode_recursion(c, amplitude, time_power, tau, steps, theta):
    """Scalar theta-scheme for y' + c y = amplitude t^p, y(0) = 0."""
    y = 0.0
    for n in range(steps):
        t0, t1 = n * tau, (n + 1) * tau
        f0, f1 = amplitude * t0 ** time_power, amplitude * t1 ** time_power
        y = ((1.0 / tau - (1.0 - theta) * c) * y + theta * f1 + (1.0 - theta) * f0) / (1.0 / tau + theta * c)
    return y


def ode_exact(c, amplitude, t):
    """Exact solution of y' + c y = amplitude t, y(0) = 0."""
    return amplitude * (t / c - (1.0 - np.exp(-c * t)) / c ** 2)


def spatially_constant_final(c, amplitude, time_power, horizon, steps, theta):
    # Without a Robin term the stiffness annihilates constants, so the field stays spatially constant
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    coeff = CoefficientSpec(diffusion=RegionCoefficient.constant(3.0))
    source = SourceSpec(amplitude=amplitude, time_power=time_power)
    sol = solve_forward(mesh, coeff, np.full(mesh.node_count, c), source, TimeGrid(horizon=horizon, steps=steps),
                        theta=theta)
    return sol.final


def test_time_grid():
    grid = TimeGrid.from_step(0.25, 1e-3)
    assert grid.steps == 250
    assert grid.tau == pytest.approx(1e-3)
    assert grid.times()[-1] == 0.25
    with pytest.raises(ValueError):
        TimeGrid.from_step(0.25, 0.03)
    with pytest.raises(ValueError):
        TimeGrid.from_step(0.25, -1e-3)


@pytest.mark.parametrize("theta", [1.0, 0.5])
@pytest.mark.parametrize("c,time_power", [(0.0, 1), (2.0, 1), (5.0, 2)])
def test_ode_reduction_matches_recursion(theta, c, time_power):
    final = spatially_constant_final(c, 7.0, time_power, 0.5, 20, theta)
    expected = ode_recursion(c, 7.0, time_power, 0.5 / 20, 20, theta)
    np.testing.assert_allclose(final, expected, rtol=1e-9)


@pytest.mark.parametrize("theta,steps,bounds", [(1.0, (20, 40), (1.8, 2.2)), (0.5, (10, 20), (3.5, 4.5))])
def test_time_convergence_order(theta, steps, bounds):
    exact = ode_exact(1.0, 1.0, 1.0)
    errors = [abs(spatially_constant_final(1.0, 1.0, 1, 1.0, n, theta)[0] - exact) for n in steps]
    ratio = errors[0] / errors[1]
    assert bounds[0] <= ratio <= bounds[1]


def test_zero_source_gives_zero_field(mesh4):
    sol = solve_forward(mesh4, CoefficientSpec(robin=RegionCoefficient.constant(10.0)), np.zeros(mesh4.node_count),
                        SourceSpec(amplitude=0.0), TimeGrid(horizon=0.25, steps=5))
    np.testing.assert_array_equal(sol.final, 0.0)


def test_invalid_theta(mesh4):
    with pytest.raises(ValueError):
        solve_forward(mesh4, CoefficientSpec(), np.zeros(mesh4.node_count), SourceSpec(amplitude=1.0),
                      TimeGrid(horizon=1.0, steps=2), theta=0.3)


def test_trajectory_and_time_derivative(unit_square, mesh4):
    c = sample_to_nodes(mesh4, unit_square.c_true)
    grid = TimeGrid(horizon=0.25, steps=10)
    sol = solve_forward(mesh4, unit_square.coeff, c, unit_square.source, grid, keep_trajectory=True)
    assert len(sol.trajectory) == 11
    np.testing.assert_array_equal(sol.trajectory[0], 0.0)
    np.testing.assert_array_equal(sol.trajectory[-1], sol.final)
    np.testing.assert_array_equal(sol.trajectory[-2], sol.penultimate)
    np.testing.assert_allclose(sol.time_derivative_at_T, (sol.final - sol.penultimate) / grid.tau)


def test_step_implicit_matches_single_step(unit_square, mesh4):
    ops = assemble_operators(mesh4, unit_square.coeff)
    c = sample_to_nodes(mesh4, unit_square.c_true)
    grid = TimeGrid(horizon=0.1, steps=1)
    sol = solve_forward(mesh4, unit_square.coeff, c, unit_square.source, grid, operators=ops)
    F = ops.lumped_mass * unit_square.source.evaluate(mesh4.nodes, 0.1)
    w1 = step_implicit(ops.stiffness, ops.lumped_mass, c, np.zeros(mesh4.node_count), F, 0.1)
    np.testing.assert_allclose(w1, sol.final, rtol=1e-12)


def test_discrete_maximum_principle_on_unit_square(unit_square, mesh16, ops16):
    c = sample_to_nodes(mesh16, unit_square.c_true)
    sol = solve_forward(mesh16, unit_square.coeff, c, unit_square.source, TimeGrid.from_step(0.25, 1e-2),
                        operators=ops16, keep_trajectory=True)
    assert sol.dmp_hypotheses
    assert not sol.dmp_violated
    report = check_discrete_monotonicity(sol)
    assert report.nonnegative and report.nondecreasing

    # The per-step statistics give the same verdict without a trajectory
    sol.trajectory = None
    assert check_discrete_monotonicity(sol).nondecreasing


def test_crank_nicolson_does_not_claim_dmp(unit_square, mesh4):
    sol = solve_forward(mesh4, unit_square.coeff, np.zeros(mesh4.node_count), unit_square.source,
                        TimeGrid(horizon=0.25, steps=5), theta=0.5)
    assert not sol.dmp_hypotheses


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_solver_methods_agree(unit_square, mesh16, ops16, method):
    c = sample_to_nodes(mesh16, unit_square.c_true)
    grid = TimeGrid(horizon=0.25, steps=25)
    reference = solve_forward(mesh16, unit_square.coeff, c, unit_square.source, grid, operators=ops16, method="direct")
    sol = solve_forward(mesh16, unit_square.coeff, c, unit_square.source, grid, operators=ops16, method=method)
    np.testing.assert_allclose(sol.final, reference.final, rtol=1e-7)
