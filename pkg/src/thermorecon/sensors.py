"""Sensors, interpolation operators and synthetic measurements."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import LoadCase, SPDSolver, assemble_stiffness, build_dof_map, external_load, strain_matrix, thermal_load_matrix
from .mesh import Mesh

SENSOR_KINDS = ("displacement", "strain")


class LocationError(ValueError):
    """A point does not lie inside any element."""


@dataclass(frozen=True)
class Sensor:
    id: int
    position: tuple[float, float, float]
    kind: str = "displacement"
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in SENSOR_KINDS:
            raise ValueError(f"sensor {self.id}: unknown kind {self.kind!r}")
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-12:
            raise ValueError(f"sensor {self.id}: direction must be unit length")
        if not self.weight >= 0:
            raise ValueError(f"sensor {self.id}: weight must be >= 0")


def parse_sensors(text: str | bytes) -> list[Sensor]:
    doc = json.loads(text)
    sensors = []
    for i, s in enumerate(doc["sensors"]):
        try:
            sensors.append(
                Sensor(
                    id=int(s["id"]),
                    position=tuple(float(v) for v in s["pos"]),
                    kind=s.get("kind", "displacement"),
                    direction=tuple(float(v) for v in s["dir"]),
                    weight=float(s.get("weight", 1.0)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"sensors[{i}]: malformed entry ({exc})") from exc
    ids = [s.id for s in sensors]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sensor ids")
    return sensors


def sensors_to_dict(sensors: list[Sensor]) -> dict:
    return {
        "sensors": [
            {"id": s.id, "pos": list(s.position), "kind": s.kind, "dir": list(s.direction), "weight": s.weight}
            for s in sensors
        ]
    }


def load_sensors(path: str | Path) -> list[Sensor]:
    return parse_sensors(Path(path).read_text())


def save_sensors(sensors: list[Sensor], path: str | Path) -> None:
    Path(path).write_text(json.dumps(sensors_to_dict(sensors), indent=1))


def axis_sensors(start_id: int, position, dimension: int, *, weight: float = 1.0) -> list[Sensor]:
    """One displacement channel per spatial axis at ``position``."""
    out = []
    for c in range(dimension):
        d = [0.0, 0.0, 0.0]
        d[c] = 1.0
        out.append(Sensor(start_id + c, tuple(float(v) for v in position), "displacement", tuple(d), weight))
    return out


# ---------------------------------------------------------------- point location


def _barycentric_simplices(mesh: Mesh, kind: str, point: np.ndarray):
    els = [e for e in mesh.elements if e.kind == kind]
    if not els:
        return [], np.zeros((0, 0))
    conn = np.array([e.nodes for e in els])
    dim = mesh.dimension
    verts = mesh.nodes[conn][:, :, :dim]  # (E, nn, dim)
    # solve [1 ... 1; x_a ...] lambda = [1; p]
    m = np.concatenate([np.ones((len(els), 1, verts.shape[1])), verts.transpose(0, 2, 1)], axis=1)
    rhs = np.concatenate([[1.0], point[:dim]])
    lam = np.linalg.solve(m, np.broadcast_to(rhs, (len(els), dim + 1))[..., None])[..., 0]
    return els, lam


def locate(mesh: Mesh, point, tol: float | None = None) -> tuple[int, np.ndarray]:
    """Containing element id and its shape-function values at ``point``.

    Points on shared boundaries go to the lowest element id. Truss members
    contain the points within ``tol`` of their axis segment.
    """
    point = np.asarray(point, dtype=float)
    if tol is None:
        tol = 1e-9 * max(mesh.bbox_size(), 1.0)
    candidates: list[tuple[int, np.ndarray]] = []
    for kind in ("tri3", "tet4"):
        els, lam = _barycentric_simplices(mesh, kind, point)
        if not els:
            continue
        # barycentric tolerance scaled to the element size
        sizes = np.array([np.ptp(mesh.element_coords(e), axis=0).max() for e in els])
        ok = np.all(lam >= -tol / sizes[:, None], axis=1)
        for i in np.flatnonzero(ok):
            candidates.append((els[i].id, lam[i]))
    for el in mesh.elements:
        if el.kind != "truss3d":
            continue
        a, b = mesh.element_coords(el)
        ab = b - a
        length2 = float(ab @ ab)
        s = float((point - a) @ ab) / length2
        if s < -tol / np.sqrt(length2) or s > 1 + tol / np.sqrt(length2):
            continue
        s = min(max(s, 0.0), 1.0)
        if np.linalg.norm(a + s * ab - point) <= tol:
            candidates.append((el.id, np.array([1.0 - s, s])))
    if not candidates:
        raise LocationError(f"point {point.tolist()} lies outside the mesh")
    eid, lam = min(candidates, key=lambda c: c[0])
    lam = np.clip(lam, 0.0, None)
    return eid, lam / lam.sum()


# ---------------------------------------------------------------- operators


@dataclass
class InterpolationOperator:
    """Sparse map from the full dof vector to one scalar reading per sensor."""

    matrix: sp.csr_matrix  # (n_sensors, n_dofs)
    sensors: list[Sensor]

    @property
    def weights(self) -> np.ndarray:
        return np.array([s.weight for s in self.sensors])

    @property
    def is_strain(self) -> np.ndarray:
        return np.array([s.kind == "strain" for s in self.sensors])

    def apply(self, u_full: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(u_full).ravel()


def _strain_row_weights(kind: str, direction: np.ndarray, bm_rows: int, axis=None) -> np.ndarray:
    """Weights turning a Voigt strain vector into the normal strain along ``direction``."""
    d = direction
    if kind == "truss3d":
        return np.array([float(axis @ d[: len(axis)]) ** 2])
    if bm_rows == 3:
        return np.array([d[0] ** 2, d[1] ** 2, d[0] * d[1]])
    return np.array([d[0] ** 2, d[1] ** 2, d[2] ** 2, d[0] * d[1], d[1] * d[2], d[2] * d[0]])


def build_interpolation(mesh: Mesh, sensors: list[Sensor]) -> InterpolationOperator:
    dim = mesh.dimension
    by_id = {e.id: e for e in mesh.elements}
    rows, cols, vals = [], [], []
    failed = []
    for r, s in enumerate(sensors):
        try:
            eid, shape = locate(mesh, s.position)
        except LocationError:
            failed.append(s.id)
            continue
        el = by_id[eid]
        direction = np.asarray(s.direction, dtype=float)
        if s.kind == "displacement":
            for n, nv in zip(el.nodes, shape):
                for c in range(dim):
                    if direction[c] != 0.0 and nv != 0.0:
                        rows.append(r)
                        cols.append(n * dim + c)
                        vals.append(nv * direction[c])
        else:
            coords = mesh.element_coords(el)
            bm, _ = strain_matrix(el, coords, dim)
            axis = None
            if el.kind == "truss3d":
                delta = coords[1, :dim] - coords[0, :dim]
                axis = delta / np.linalg.norm(delta)
            q = _strain_row_weights(el.kind, direction, bm.shape[0], axis)
            row = q @ bm
            dofs = (np.asarray(el.nodes)[:, None] * dim + np.arange(dim)).ravel()
            for g, v in zip(dofs, row):
                if v != 0.0:
                    rows.append(r)
                    cols.append(int(g))
                    vals.append(float(v))
    if failed:
        raise LocationError(f"sensors outside the mesh: {failed}")
    m = sp.coo_matrix((vals, (rows, cols)), shape=(len(sensors), mesh.n_dofs)).tocsr()
    return InterpolationOperator(m, list(sensors))


def sample_field(mesh: Mesh, values, positions) -> np.ndarray:
    """Interpolate a nodal scalar field at arbitrary points with the element shape functions."""
    values = np.asarray(values, dtype=float)
    by_id = {e.id: e for e in mesh.elements}
    out = np.empty(len(positions))
    for i, p in enumerate(positions):
        eid, shape = locate(mesh, p)
        out[i] = shape @ values[list(by_id[eid].nodes)]
    return out


# ---------------------------------------------------------------- measurements


@dataclass
class MeasurementSet:
    case_ids: list[int]
    sensor_ids: list[int]
    values: np.ndarray  # (n_cases, n_sensors)
    provenance: str = "external"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.case_ids), len(self.sensor_ids)):
            raise ValueError("measurement table is incomplete")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("case_id,sensor_id,value\n")
        for i, c in enumerate(self.case_ids):
            for j, s in enumerate(self.sensor_ids):
                buf.write(f"{c},{s},{float(self.values[i, j])!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, provenance: str = "external") -> "MeasurementSet":
        table: dict[tuple[int, int], float] = {}
        for row in csv.DictReader(io.StringIO(text)):
            table[(int(row["case_id"]), int(row["sensor_id"]))] = float(row["value"])
        cases = sorted({k[0] for k in table})
        sensors = sorted({k[1] for k in table})
        try:
            values = [[table[(c, s)] for s in sensors] for c in cases]
        except KeyError as exc:
            raise ValueError(f"missing measurement for (case, sensor) {exc.args[0]}") from exc
        return cls(cases, sensors, np.array(values).reshape(len(cases), len(sensors)), provenance)

    def reordered(self, sensor_ids: list[int]) -> "MeasurementSet":
        index = {s: j for j, s in enumerate(self.sensor_ids)}
        try:
            cols = [index[s] for s in sensor_ids]
        except KeyError as exc:
            raise ValueError(f"no measurement for sensor {exc.args[0]}") from exc
        return MeasurementSet(self.case_ids, list(sensor_ids), self.values[:, cols], self.provenance)


def synthesize_measurements(
    mesh: Mesh,
    load_cases: list[LoadCase],
    target_dt,
    sensors: list[Sensor],
    noise_stddev: float = 0.0,
    seed: int | None = None,
) -> MeasurementSet:
    """Simulate sensor readings for a prescribed temperature field."""
    if noise_stddev < 0:
        raise ValueError("noise_stddev must be >= 0")
    target_dt = np.asarray(target_dt, dtype=float)
    dofmap = build_dof_map(mesh)
    solver = SPDSolver(assemble_stiffness(mesh, dofmap))
    f_thermal = thermal_load_matrix(mesh, dofmap) @ target_dt
    op = build_interpolation(mesh, sensors)
    values = np.empty((len(load_cases), len(sensors)))
    for i, case in enumerate(load_cases):
        u = solver.solve(external_load(mesh, case, dofmap) + f_thermal)
        values[i] = op.apply(dofmap.expand(u))
    if noise_stddev > 0:
        values = values + np.random.default_rng(seed).normal(0.0, noise_stddev, values.shape)
    return MeasurementSet([c.id for c in load_cases], [s.id for s in sensors], values, "synthetic")
