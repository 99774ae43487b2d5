import numpy as np
import pytest

from helpers import bar, gradient_fixtures
from thermorecon.fem import LoadCase
from thermorecon.inverse import InverseProblem
from thermorecon.optimize import DivergenceError, OptimizerConfig, bb_step, gradient_descent, reconstruct
from thermorecon.regularize import DesignMap
from thermorecon.sensors import Sensor, synthesize_measurements


def quadratic(a):
    def f(x):
        return 0.5 * a * float(x @ x), a * x

    return f


# ---------------------------------------------------------------- bb step


def test_bb_step_example():
    assert bb_step([2.0, 0.0], [4.0, 0.0], 9.0) == 0.5


@pytest.mark.parametrize("d, y", [([1.0, 0.0], [0.0, 1.0]), ([1.0, 0.0], [-1.0, 0.0]), ([0.0, 0.0], [0.0, 0.0])])
def test_bb_step_fallback(d, y):
    assert bb_step(d, y, 0.125) == 0.125


# ---------------------------------------------------------------- descent


def test_one_dimensional_quadratic():
    cfg = OptimizerConfig(max_step=10.0, initial_step=0.1, step_limit="gamma")
    state, converged = gradient_descent(quadratic(4.0), np.array([1.0]), cfg)
    assert state.steps[0] == 0.1
    assert state.steps[1] == pytest.approx(0.25, rel=1e-14)
    assert converged and state.iteration == 2


def test_step_is_clamped_and_recorded():
    cfg = OptimizerConfig(max_step=0.05, initial_step=0.1, step_limit="gamma", max_iterations=3)
    state, _ = gradient_descent(quadratic(4.0), np.array([1.0]), cfg)
    assert state.steps == [0.05, 0.05, 0.05]


def test_update_limit_caps_largest_change():
    cfg = OptimizerConfig(max_step=0.01, max_iterations=20)
    state, _ = gradient_descent(quadratic(3.0), np.array([1.0, -2.0, 0.5]), cfg)
    assert max(state.max_updates) <= 0.01 * (1 + 1e-12)


def test_constant_step_is_monotone():
    cfg = OptimizerConfig(max_step=1.0, step_rule="constant", constant_step=0.1, max_iterations=50)
    state, _ = gradient_descent(quadratic(4.0), np.array([1.0, -3.0]), cfg)
    assert all(b <= a for a, b in zip(state.costs, state.costs[1:]))


def test_zero_cost_converges_immediately():
    state, converged = gradient_descent(lambda x: (0.0, np.zeros_like(x)), np.zeros(4), OptimizerConfig(max_step=1.0))
    assert converged and state.iteration == 0


def test_max_iterations_zero_evaluates_once():
    state, converged = gradient_descent(quadratic(1.0), np.ones(2), OptimizerConfig(max_step=1.0, max_iterations=0))
    assert not converged and len(state.costs) == 1


def test_divergence_guard():
    cfg = OptimizerConfig(max_step=1.0, step_rule="constant", constant_step=1.0, max_iterations=100)
    with pytest.raises(DivergenceError) as info:
        gradient_descent(quadratic(4.0), np.array([1.0]), cfg)
    assert info.value.state.iteration > 0


def test_non_finite_cost():
    with pytest.raises(DivergenceError, match="non-finite"):
        gradient_descent(lambda x: (np.nan, x), np.ones(2), OptimizerConfig(max_step=1.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"max_step": 0.0},
        {"max_step": 1.0, "convergence_factor": 1.0},
        {"max_step": 1.0, "step_rule": "newton"},
        {"max_step": 1.0, "step_rule": "constant"},
        {"max_step": 1.0, "step_limit": "both"},
        {"max_step": 1.0, "max_iterations": -1},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


# ---------------------------------------------------------------- reconstruct


def test_bar_reconstruction():
    mesh = bar()
    sensors = [Sensor(0, (1.0, 0.0, 0.0))]
    measured = synthesize_measurements(mesh, [LoadCase(0)], [10.0, 10.0], sensors)
    problem = InverseProblem(mesh, [LoadCase(0)], sensors, measured)
    result = reconstruct(problem, DesignMap(), OptimizerConfig(max_step=100.0, max_iterations=10))
    assert result.converged and result.iterations <= 10
    assert result.delta_t.mean() == pytest.approx(10.0, abs=1e-6 * 10)


def test_zero_target_reconstruction():
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    measured = synthesize_measurements(mesh, cases, np.zeros(mesh.n_nodes), sensors)
    problem = InverseProblem(mesh, cases, sensors, measured)
    result = reconstruct(problem, DesignMap(), OptimizerConfig(max_step=1.0))
    assert result.converged and result.iterations == 0
    assert not np.any(result.delta_t)


def run_patch(**cfg):
    mesh, cases, sensors = gradient_fixtures()["plate_patch"]
    target = np.random.default_rng(5).normal(0, 3, mesh.n_nodes)
    measured = synthesize_measurements(mesh, cases, target, sensors)
    problem = InverseProblem(mesh, cases, sensors, measured)
    return reconstruct(problem, DesignMap(), OptimizerConfig(max_step=1.0, max_iterations=200, **cfg))


def test_reconstruction_is_reproducible():
    a, b = run_patch(), run_patch()
    assert np.array_equal(a.delta_t, b.delta_t)
    assert a.convergence_csv() == b.convergence_csv()


def test_convergence_csv_and_snapshots():
    result = run_patch(snapshot_every=5)
    lines = result.convergence_csv().splitlines()
    assert lines[0] == "iteration,cost,step,grad_norm"
    assert len(lines) == len(result.costs) + 1
    assert float(lines[1].split(",")[1]) == result.costs[0]
    assert sorted(result.snapshots) == list(range(5, result.iterations + 1, 5))
    assert result.final_cost < result.costs[0]
