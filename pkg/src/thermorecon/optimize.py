"""Steepest descent with Barzilai-Borwein steps for temperature reconstruction."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .inverse import InverseProblem
from .regularize import DesignMap

logger = logging.getLogger(__name__)

STEP_RULES = ("barzilai_borwein", "constant")
STEP_LIMITS = ("update", "gamma")


class DivergenceError(RuntimeError):
    def __init__(self, message: str, state: "OptimizerState"):
        super().__init__(message)
        self.state = state


@dataclass
class OptimizerConfig:
    """Settings for :func:`reconstruct`.

    ``max_step`` bounds each iteration. With ``step_limit="update"`` (default)
    it caps the largest change of any design variable, ``|gamma| * max|g|``;
    with ``"gamma"`` it caps ``gamma`` itself.
    """

    max_step: float
    max_iterations: int = 5000
    convergence_factor: float = 1e-5
    step_rule: str = "barzilai_borwein"
    constant_step: float | None = None
    initial_step: float | None = None
    step_limit: str = "update"
    divergence_factor: float = 1e6
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        if not 0 < self.convergence_factor < 1:
            raise ValueError("convergence_factor must lie in (0, 1)")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.step_rule == "constant" and not (self.constant_step and self.constant_step > 0):
            raise ValueError("constant step rule needs constant_step > 0")
        if self.step_limit not in STEP_LIMITS:
            raise ValueError(f"step_limit must be one of {STEP_LIMITS}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class OptimizerState:
    iteration: int
    design: np.ndarray
    previous_design: np.ndarray | None = None
    previous_gradient: np.ndarray | None = None
    costs: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    max_updates: list[float] = field(default_factory=list)


@dataclass
class ReconstructionResult:
    delta_t: np.ndarray
    design: np.ndarray
    costs: list[float]
    steps: list[float]
    grad_norms: list[float]
    max_updates: list[float]
    iterations: int
    converged: bool
    wall_time: float
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def final_cost(self) -> float:
        return self.costs[-1]

    def convergence_csv(self) -> str:
        lines = ["iteration,cost,step,grad_norm"]
        for i, c in enumerate(self.costs):
            step = self.steps[i] if i < len(self.steps) else 0.0
            gn = self.grad_norms[i] if i < len(self.grad_norms) else 0.0
            lines.append(f"{i},{c!r},{step!r},{gn!r}")
        return "\n".join(lines) + "\n"


def bb_step(d_prev, y, fallback: float) -> float:
    """Barzilai-Borwein step ``(d.d) / (d.y)``; ``fallback`` when undefined or non-positive."""
    d_prev = np.asarray(d_prev, dtype=float)
    y = np.asarray(y, dtype=float)
    dd = float(d_prev @ d_prev)
    dy = float(d_prev @ y)
    if not np.isfinite(dd) or not np.isfinite(dy) or dy <= 0 or dd == 0:
        return fallback
    gamma = dd / dy
    return gamma if np.isfinite(gamma) else fallback


def _limit(gamma: float, grad: np.ndarray, config: OptimizerConfig) -> float:
    if config.step_limit == "gamma":
        return min(gamma, config.max_step)
    gmax = float(np.max(np.abs(grad))) if grad.size else 0.0
    if gmax == 0.0:
        return gamma
    return min(gamma, config.max_step / gmax)


def gradient_descent(cost_and_grad, x0, config: OptimizerConfig, on_snapshot=None) -> tuple[OptimizerState, bool]:
    """Minimise ``cost_and_grad(x) -> (cost, gradient)`` from ``x0``.

    Stops when the cost falls to ``convergence_factor`` times the initial cost.
    """
    state = OptimizerState(0, np.array(x0, dtype=float))
    initial = None
    converged = False
    while True:
        cost, grad = cost_and_grad(state.design)
        if not np.isfinite(cost):
            raise DivergenceError(f"non-finite cost at iteration {state.iteration}", state)
        state.costs.append(float(cost))
        state.grad_norms.append(float(np.linalg.norm(grad)))
        if initial is None:
            initial = cost
        if cost <= config.convergence_factor * initial:
            converged = True
            break
        if initial > 0 and cost > config.divergence_factor * initial:
            raise DivergenceError(f"cost {cost:.3e} exceeds divergence guard at iteration {state.iteration}", state)
        if state.iteration >= config.max_iterations:
            break

        if config.step_rule == "constant":
            gamma = config.constant_step
        elif state.previous_design is None:
            gamma = config.initial_step if config.initial_step is not None else config.max_step
            if config.step_limit == "update":
                gmax = float(np.max(np.abs(grad)))
                gamma = gamma / gmax if gmax > 0 else gamma
        else:
            gamma = bb_step(state.design - state.previous_design, grad - state.previous_gradient, np.inf)
        gamma = _limit(gamma, grad, config) if config.step_rule != "constant" else gamma
        update = -gamma * grad
        state.steps.append(float(gamma))
        state.max_updates.append(float(np.max(np.abs(update))) if update.size else 0.0)
        state.previous_design = state.design
        state.previous_gradient = grad
        state.design = state.design + update
        state.iteration += 1
        if on_snapshot and config.snapshot_every and state.iteration % config.snapshot_every == 0:
            on_snapshot(state.iteration, state.design)
    return state, converged


def reconstruct(
    problem: InverseProblem,
    design_map: DesignMap,
    config: OptimizerConfig,
    initial_temperature: float = 0.0,
) -> ReconstructionResult:
    """Identify nodal temperature changes that reproduce the measurements."""
    start = time.perf_counter()
    n = problem.n_nodes
    x0 = design_map.initial_control(n, initial_temperature)
    snapshots: dict[int, np.ndarray] = {}

    def cost_and_grad(x):
        dt = design_map.temperature(x)
        breakdown, g_dt = problem.cost_and_gradient(dt)
        return breakdown.total, design_map.pullback(x, g_dt)

    def snap(it, x):
        snapshots[it] = design_map.temperature(x)

    state, converged = gradient_descent(cost_and_grad, x0, config, snap)
    logger.info(
        "reconstruction %s after %d iterations, cost %.3e -> %.3e",
        "converged" if converged else "stopped",
        state.iteration,
        state.costs[0],
        state.costs[-1],
    )
    return ReconstructionResult(
        delta_t=design_map.temperature(state.design),
        design=state.design,
        costs=state.costs,
        steps=state.steps,
        grad_norms=state.grad_norms,
        max_updates=state.max_updates,
        iterations=state.iteration,
        converged=converged,
        wall_time=time.perf_counter() - start,
        snapshots=snapshots,
    )
