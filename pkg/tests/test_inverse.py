import numpy as np
import pytest
import scipy.sparse as sp

from helpers import bar, gradient_fixtures
from thermorecon.fem import LoadCase, SPDSolver, build_dof_map
from thermorecon.inverse import InverseProblem, adjoint_rhs, adjoint_solve, evaluate_cost, gradient
from thermorecon.mesh import Material
from thermorecon.sensors import MeasurementSet, Sensor, build_interpolation, synthesize_measurements


def table(values, sensors, cases=(0,)):
    return MeasurementSet(list(cases), [s.id for s in sensors], np.atleast_2d(values))


SENSORS = [Sensor(0, (0, 0, 0), weight=1.0), Sensor(1, (0, 0, 0), "strain", weight=3.0)]


# ---------------------------------------------------------------- cost


def test_cost_zero_for_perfect_predictions():
    m = table([[1.0, 2.0]], SENSORS)
    assert evaluate_cost(m, [[1.0, 2.0]], SENSORS).total == 0.0


def test_cost_single_sensor():
    s = [Sensor(0, (0, 0, 0))]
    c = evaluate_cost(table([[5.0]], s), [[3.0]], s)
    assert c.total == 2.0
    assert c.residuals.tolist() == [[2.0]]


def test_cost_two_identical_cases_doubles():
    one = evaluate_cost(table([[1.0, 2.0]], SENSORS), [[0.5, 1.0]], SENSORS).total
    two = evaluate_cost(table([[1.0, 2.0], [1.0, 2.0]], SENSORS, (0, 1)), [[0.5, 1.0], [0.5, 1.0]], SENSORS).total
    assert two == 2 * one


def test_cost_breakdown_reassembles():
    c = evaluate_cost(table([[1.0, 2.0]], SENSORS), [[0.0, 0.0]], SENSORS)
    assert c.displacement == 0.5
    assert c.strain == 6.0
    assert c.total == pytest.approx(c.displacement + c.strain, rel=1e-14)


def test_cost_index_mismatch():
    with pytest.raises(ValueError, match="does not match"):
        evaluate_cost(table([[1.0, 2.0]], SENSORS), [[1.0]], SENSORS)
    with pytest.raises(ValueError, match="sensor ids"):
        evaluate_cost(table([[1.0, 2.0]], SENSORS), [[1.0, 2.0]], SENSORS[::-1])


# ---------------------------------------------------------------- adjoint


def test_adjoint_rhs_zero_residual():
    mesh = bar()
    op = build_interpolation(mesh, [Sensor(0, (1.0, 0, 0))])
    assert not np.any(adjoint_rhs([0.0], op, build_dof_map(mesh)))


def test_adjoint_rhs_node_sensor():
    mesh = bar()
    op = build_interpolation(mesh, [Sensor(0, (1.0, 0, 0))])
    rhs = adjoint_rhs([3.0], op, build_dof_map(mesh))
    assert rhs.tolist() == [-3.0]


def test_adjoint_rhs_linear_in_weights():
    mesh = bar()
    single = build_interpolation(mesh, [Sensor(0, (0.7, 0, 0), weight=1.5)])
    double = build_interpolation(mesh, [Sensor(0, (0.7, 0, 0), weight=3.0)])
    dm = build_dof_map(mesh)
    assert np.array_equal(adjoint_rhs([2.0], double, dm), 2 * adjoint_rhs([2.0], single, dm))


def test_adjoint_solve_examples():
    solver = SPDSolver(sp.csc_matrix([[5.0]]))
    assert adjoint_solve(solver, np.array([10.0])) == pytest.approx([2.0])
    assert not np.any(adjoint_solve(solver, np.zeros(1)))


def test_adjoint_self_adjointness():
    mesh, _, _ = gradient_fixtures()["tet_block"]
    from thermorecon.fem import assemble_stiffness

    solver = SPDSolver(assemble_stiffness(mesh))
    rng = np.random.default_rng(9)
    for _ in range(5):
        b1, b2 = rng.normal(size=(2, solver.size))
        lhs = adjoint_solve(solver, b1) @ b2
        rhs = adjoint_solve(solver, b2) @ b1
        assert lhs == pytest.approx(rhs, rel=1e-12)


# ---------------------------------------------------------------- gradient


def test_gradient_zero_adjoints():
    g = gradient(sp.csr_matrix(np.ones((3, 4))), [np.zeros(3), np.zeros(3)])
    assert g.tolist() == [0.0] * 4


def test_gradient_free_tip_closed_form():
    alpha, length, w = 1e-5, 2.0, 0.5
    mesh = bar(length=length, material=Material(0, 1.0, 7.0, 0.0, alpha))
    sensors = [Sensor(0, (length, 0, 0), weight=w)]
    measured = MeasurementSet([0], [0], [[3e-4]])
    problem = InverseProblem(mesh, [LoadCase(0)], sensors, measured)
    dt = np.array([4.0, 12.0])
    cost, g = problem.cost_and_gradient(dt)
    r = 3e-4 - alpha * length * dt.mean()
    assert cost.residuals[0, 0] == pytest.approx(r, rel=1e-12)
    assert g == pytest.approx([-w * r * alpha * length / 2] * 2, rel=1e-12)


@pytest.mark.parametrize("name", ["bar", "plate_patch", "tet_block"])
def test_gradient_matches_central_differences(name):
    mesh, cases, sensors = gradient_fixtures()[name]
    rng = np.random.default_rng(11)
    measured = synthesize_measurements(mesh, cases, rng.normal(0, 5, mesh.n_nodes), sensors)
    problem = InverseProblem(mesh, cases, sensors, measured)
    x = rng.normal(0, 3, mesh.n_nodes)
    _, g = problem.cost_and_gradient(x)
    h = 0.5  # the cost is quadratic, so central differences are exact for any step
    fd = np.array([(problem.cost(x + h * e).total - problem.cost(x - h * e).total) / (2 * h) for e in np.eye(mesh.n_nodes)])
    assert np.abs(g - fd).max() <= 1e-8 * np.abs(g).max()


def test_directional_derivative_quadratic_remainder():
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    rng = np.random.default_rng(12)
    measured = synthesize_measurements(mesh, cases, rng.normal(0, 5, mesh.n_nodes), sensors)
    problem = InverseProblem(mesh, cases, sensors, measured)
    x, d = rng.normal(size=(2, mesh.n_nodes))
    c0, g = problem.cost_and_gradient(x)
    remainders = []
    for h in (1e-1, 5e-2):
        remainders.append(problem.cost(x + h * d).total - c0.total - h * g @ d)
    # exactly quadratic: halving h quarters the remainder
    assert remainders[1] == pytest.approx(remainders[0] / 4, rel=1e-6)


def test_problem_counts_solves_per_case():
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    measured = synthesize_measurements(mesh, cases, np.zeros(mesh.n_nodes), sensors)
    problem = InverseProblem(mesh, cases, sensors, measured)
    problem.cost_and_gradient(np.ones(mesh.n_nodes))
    assert problem.forward_solves == len(cases) == 2
    assert problem.adjoint_solves == len(cases)


def test_problem_requires_measurements_for_every_case():
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    measured = synthesize_measurements(mesh, cases[:1], np.zeros(mesh.n_nodes), sensors)
    with pytest.raises(ValueError, match="no measurements"):
        InverseProblem(mesh, cases, sensors, measured)


def test_problem_reorders_measurement_columns():
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    dt = np.random.default_rng(1).normal(size=mesh.n_nodes)
    measured = synthesize_measurements(mesh, cases, dt, sensors)
    shuffled = measured.reordered([s.id for s in sensors][::-1])
    problem = InverseProblem(mesh, cases, sensors, shuffled)
    assert problem.cost(dt).total == 0.0
