"""Scenario files: the inputs and settings of one reconstruction experiment.

A scenario is a JSON document whose paths are resolved relative to the file::

    {
      "name": "plate-14",
      "mesh": "plate.mesh.json",
      "load_cases": ["plate.load.json"],
      "sensors": "plate-14.sensors.json",
      "target": {"default": 0.0, "regions": [{"lo": [15, 26, null], "hi": [20, 30, null], "value": 10.0}]},
      "filter": {"enabled": true, "radius": 5.0, "bounds": [-5.0, 15.0], "beta": 1.0},
      "optimizer": {"max_step": 2.5e-3, "max_iterations": 5000},
      "baselines": {"k": 3, "variogram": "gaussian"},
      "output": "out/plate-14"
    }

``target`` may instead be ``{"csv": "field.csv"}``. A scenario defines
exactly one of ``target`` and ``measurements`` (a measurements CSV).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .export import load_field, rmse
from .fem import LoadCase, load_load_case
from .interp import SampleSet, interpolate_field
from .inverse import InverseProblem
from .mesh import Mesh, load_mesh
from .optimize import OptimizerConfig, ReconstructionResult, reconstruct
from .regularize import Bounds, DesignMap, build_kernel
from .sensors import MeasurementSet, Sensor, load_sensors, sample_field, synthesize_measurements


class ScenarioError(ValueError):
    pass


_OPTIMIZER_KEYS = {
    "max_step",
    "max_iterations",
    "convergence_factor",
    "step_rule",
    "constant_step",
    "initial_step",
    "step_limit",
    "divergence_factor",
    "snapshot_every",
}


@dataclass
class FilterSettings:
    enabled: bool = True
    radius: float = 1.0
    bounds: tuple[float, float] | None = (-5.0, 15.0)
    beta: float = 1.0


@dataclass
class Scenario:
    name: str
    base_dir: Path
    mesh_path: Path
    load_case_paths: list[Path]
    sensors_path: Path
    target: dict | None = None
    measurements_path: Path | None = None
    noise_stddev: float = 0.0
    filter: FilterSettings = field(default_factory=FilterSettings)
    optimizer: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)
    output: Path | None = None

    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # ------------------------------------------------------------ inputs

    @property
    def mesh(self) -> Mesh:
        if "mesh" not in self._cache:
            self._cache["mesh"] = load_mesh(self.mesh_path)
        return self._cache["mesh"]

    @property
    def load_cases(self) -> list[LoadCase]:
        if "cases" not in self._cache:
            cases = [load_load_case(p) for p in self.load_case_paths]
            for c in cases:
                c.validate(self.mesh)
            self._cache["cases"] = cases
        return self._cache["cases"]

    @property
    def sensors(self) -> list[Sensor]:
        if "sensors" not in self._cache:
            self._cache["sensors"] = load_sensors(self.sensors_path)
        return self._cache["sensors"]

    @property
    def has_target(self) -> bool:
        return self.target is not None

    def target_field(self) -> np.ndarray:
        if self.target is None:
            raise ScenarioError(f"scenario {self.name!r} defines no target field")
        if "target" not in self._cache:
            self._cache["target"] = evaluate_target(self.target, self.mesh, self.base_dir)
        return self._cache["target"]

    def measurements(self, seed: int | None = None, noise_stddev: float | None = None) -> MeasurementSet:
        """Measured readings, synthesized from the target when no file is given."""
        if self.measurements_path is not None:
            return MeasurementSet.from_csv(self.measurements_path.read_text())
        noise = self.noise_stddev if noise_stddev is None else noise_stddev
        return synthesize_measurements(self.mesh, self.load_cases, self.target_field(), self.sensors, noise, seed)

    # ------------------------------------------------------------ settings

    def design_map(self, use_filter: bool = True) -> DesignMap:
        """Vertex Morphing plus sigmoid bounds, or the raw temperature design."""
        f = self.filter
        if not (use_filter and f.enabled):
            return DesignMap()
        kernel = build_kernel(self.mesh.nodes, f.radius)
        bounds = Bounds(f.bounds[0], f.bounds[1], f.beta) if f.bounds is not None else None
        return DesignMap(kernel, bounds)

    def optimizer_config(self, max_iterations: int | None = None) -> OptimizerConfig:
        opts = dict(self.optimizer)
        if max_iterations is not None:
            opts["max_iterations"] = max_iterations
        return OptimizerConfig(**opts)

    def sample_set(self) -> SampleSet:
        """Target temperatures at the distinct sensor positions (baseline input)."""
        positions = np.unique(np.array([s.position for s in self.sensors]), axis=0)
        return SampleSet(positions, sample_field(self.mesh, self.target_field(), positions))


def _resolve(base: Path, value, where: str) -> Path:
    if not isinstance(value, str):
        raise ScenarioError(f"{where}: expected a path string")
    p = (base / value).resolve()
    if not p.exists():
        raise ScenarioError(f"{where}: file not found: {p}")
    return p


def parse_scenario(doc: dict, base_dir: str | Path) -> Scenario:
    base = Path(base_dir)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected an object")
    for key in ("mesh", "load_cases", "sensors"):
        if key not in doc:
            raise ScenarioError(f"scenario: missing key {key!r}")
    if ("target" in doc) == ("measurements" in doc):
        raise ScenarioError("scenario: define exactly one of 'target' and 'measurements'")
    target = doc.get("target")
    if target is not None:
        if not isinstance(target, dict) or not ({"csv", "regions", "default"} & set(target)):
            raise ScenarioError("target: expected 'csv' or 'default'/'regions'")
        if "csv" in target:
            _resolve(base, target["csv"], "target.csv")
    cases = doc["load_cases"]
    if not isinstance(cases, list) or not cases:
        raise ScenarioError("load_cases: expected a non-empty list of paths")

    fdoc = doc.get("filter", {})
    bounds = fdoc.get("bounds", (-5.0, 15.0))
    settings = FilterSettings(
        enabled=bool(fdoc.get("enabled", True)),
        radius=float(fdoc.get("radius", 1.0)),
        bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])),
        beta=float(fdoc.get("beta", 1.0)),
    )
    optimizer = dict(doc.get("optimizer", {}))
    unknown = set(optimizer) - _OPTIMIZER_KEYS
    if unknown:
        raise ScenarioError(f"optimizer: unknown keys {sorted(unknown)}")
    if "max_step" not in optimizer:
        raise ScenarioError("optimizer: missing key 'max_step'")
    OptimizerConfig(**optimizer)  # validate early

    return Scenario(
        name=str(doc.get("name", "scenario")),
        base_dir=base,
        mesh_path=_resolve(base, doc["mesh"], "mesh"),
        load_case_paths=[_resolve(base, p, f"load_cases[{i}]") for i, p in enumerate(cases)],
        sensors_path=_resolve(base, doc["sensors"], "sensors"),
        target=target,
        measurements_path=_resolve(base, doc["measurements"], "measurements") if "measurements" in doc else None,
        noise_stddev=float(doc.get("noise_stddev", 0.0)),
        filter=settings,
        optimizer=optimizer,
        baselines=dict(doc.get("baselines", {})),
        output=(base / doc["output"]) if "output" in doc else None,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(doc, path.parent)


def evaluate_target(spec: dict, mesh: Mesh, base_dir: str | Path = ".") -> np.ndarray:
    """Nodal target temperatures from axis-aligned box regions or a field CSV.

    Later regions override earlier ones; ``null`` box limits are unbounded.
    """
    if "csv" in spec:
        return load_field(Path(base_dir) / spec["csv"], mesh.n_nodes)
    out = np.full(mesh.n_nodes, float(spec.get("default", 0.0)))
    for i, region in enumerate(spec.get("regions", [])):
        lo = [-math.inf if v is None else float(v) for v in region.get("lo", [None] * 3)]
        hi = [math.inf if v is None else float(v) for v in region.get("hi", [None] * 3)]
        if len(lo) != 3 or len(hi) != 3:
            raise ScenarioError(f"target.regions[{i}]: lo and hi need 3 entries")
        inside = np.all((mesh.nodes >= lo) & (mesh.nodes <= hi), axis=1)
        out[inside] = float(region["value"])
    return out


# ---------------------------------------------------------------- drivers


def build_problem(scenario: Scenario, measurements: MeasurementSet | None = None) -> InverseProblem:
    if measurements is None:
        measurements = scenario.measurements()
    return InverseProblem(scenario.mesh, scenario.load_cases, scenario.sensors, measurements)


def run_reconstruction(
    scenario: Scenario,
    *,
    use_filter: bool = True,
    max_iterations: int | None = None,
    measurements: MeasurementSet | None = None,
) -> ReconstructionResult:
    problem = build_problem(scenario, measurements)
    return reconstruct(problem, scenario.design_map(use_filter), scenario.optimizer_config(max_iterations))


def run_baseline(scenario: Scenario, method: str, samples: SampleSet | None = None) -> np.ndarray:
    """Interpolate sensor-location temperatures over the mesh with a baseline method."""
    if samples is None:
        samples = scenario.sample_set()
    params = {k: v for k, v in scenario.baselines.items() if k in ("k", "weighting", "variogram")}
    return interpolate_field(scenario.mesh, samples, method, **params)


def compare_baselines(scenario: Scenario, methods=("knn", "ok", "uk")) -> dict[str, float]:
    target = scenario.target_field()
    samples = scenario.sample_set()
    return {m: rmse(run_baseline(scenario, m, samples), target) for m in methods}
