"""Measurement misfit, adjoint solve and the temperature gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import DofMap, LoadCase, SPDSolver, assemble_stiffness, build_dof_map, external_load, thermal_load_matrix
from .mesh import Mesh
from .sensors import InterpolationOperator, MeasurementSet, Sensor, build_interpolation


@dataclass
class CostBreakdown:
    total: float
    residuals: np.ndarray  # (n_cases, n_sensors), measured - predicted
    displacement: float
    strain: float


def evaluate_cost(measurements: MeasurementSet, predictions, sensors: list[Sensor]) -> CostBreakdown:
    """Half the weighted sum of squared residuals over all cases and sensors."""
    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape != measurements.values.shape:
        raise ValueError(
            f"prediction table {predictions.shape} does not match measurements {measurements.values.shape}"
        )
    if [s.id for s in sensors] != list(measurements.sensor_ids):
        raise ValueError("sensor ids do not match the measurement columns")
    w = np.array([s.weight for s in sensors])
    strain = np.array([s.kind == "strain" for s in sensors])
    r = measurements.values - predictions
    terms = 0.5 * w * r**2
    disp_part = float(terms[:, ~strain].sum())
    strain_part = float(terms[:, strain].sum())
    return CostBreakdown(disp_part + strain_part, r, disp_part, strain_part)


def adjoint_rhs(residuals, operator: InterpolationOperator, dofmap: DofMap) -> np.ndarray:
    """Derivative of the cost with respect to the free displacements of one case."""
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (operator.matrix.shape[0],):
        raise ValueError("one residual per sensor expected")
    full = -(operator.matrix.T @ (operator.weights * residuals))
    return np.asarray(full)[dofmap.free]


def adjoint_solve(solver: SPDSolver, rhs) -> np.ndarray:
    # K is symmetric, so the forward factorization serves the transposed system
    return solver.solve(rhs)


def gradient(thermal_matrix, adjoints) -> np.ndarray:
    """Sum over load cases of ``G^T @ adjoint``.

    ``thermal_matrix`` is the reduced thermal-load sensitivity from
    :func:`thermorecon.fem.thermal_load_matrix`; the cost has no explicit
    temperature dependence, so the direct term is zero.
    """
    g = np.zeros(thermal_matrix.shape[1])
    for adj in adjoints:
        g += thermal_matrix.T @ adj
    return g


class InverseProblem:
    """Forward model, sensors and measurements for one reconstruction.

    The stiffness does not depend on temperature, so it is assembled and
    factored once; every call still performs one forward and one adjoint solve
    per load case.
    """

    def __init__(self, mesh: Mesh, load_cases: list[LoadCase], sensors: list[Sensor], measurements: MeasurementSet):
        if not load_cases:
            raise ValueError("at least one load case is required")
        self.mesh = mesh
        self.load_cases = list(load_cases)
        self.sensors = list(sensors)
        case_index = {c: i for i, c in enumerate(measurements.case_ids)}
        missing = [c.id for c in load_cases if c.id not in case_index]
        if missing:
            raise ValueError(f"no measurements for load cases {missing}")
        m = measurements.reordered([s.id for s in sensors])
        rows = [case_index[c.id] for c in load_cases]
        self.measurements = MeasurementSet([c.id for c in load_cases], m.sensor_ids, m.values[rows], m.provenance)
        self.dofmap = build_dof_map(mesh)
        self.solver = SPDSolver(assemble_stiffness(mesh, self.dofmap))
        self.thermal = thermal_load_matrix(mesh, self.dofmap)
        self.f_ext = [external_load(mesh, c, self.dofmap) for c in load_cases]
        self.operator = build_interpolation(mesh, sensors)
        self.forward_solves = 0
        self.adjoint_solves = 0

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    def displacements(self, delta_t) -> list[np.ndarray]:
        f_t = self.thermal @ np.asarray(delta_t, dtype=float)
        out = []
        for f in self.f_ext:
            out.append(self.solver.solve(f + f_t))
            self.forward_solves += 1
        return out

    def predict(self, states: list[np.ndarray]) -> np.ndarray:
        return np.array([self.operator.apply(self.dofmap.expand(u)) for u in states])

    def cost(self, delta_t) -> CostBreakdown:
        return evaluate_cost(self.measurements, self.predict(self.displacements(delta_t)), self.sensors)

    def cost_and_gradient(self, delta_t) -> tuple[CostBreakdown, np.ndarray]:
        breakdown = self.cost(delta_t)
        adjoints = []
        for r in breakdown.residuals:
            adjoints.append(adjoint_solve(self.solver, adjoint_rhs(r, self.operator, self.dofmap)))
            self.adjoint_solves += 1
        return breakdown, gradient(self.thermal, adjoints)
