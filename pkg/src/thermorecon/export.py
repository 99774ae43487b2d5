"""Nodal field CSV, RMSE and legacy VTK output."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .mesh import Mesh

VTK_CELL_TYPES = {"truss3d": 3, "tri3": 5, "tet4": 10}


def rmse(field_a, field_b) -> float:
    """Root-mean-square nodal difference between two fields on the same nodes."""
    a = np.asarray(field_a, dtype=float).ravel()
    b = np.asarray(field_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"node mismatch: {a.size} vs {b.size} values")
    if a.size == 0:
        raise ValueError("empty fields")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def field_to_csv(values, column: str = "delta_T") -> str:
    lines = [f"node_id,{column}"]
    lines += [f"{i},{float(v)!r}" for i, v in enumerate(np.asarray(values, dtype=float))]
    return "\n".join(lines) + "\n"


def parse_field_csv(text: str, n_nodes: int | None = None) -> np.ndarray:
    """Read a ``node_id,<value>`` table into a dense nodal vector."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or len(header) < 2 or header[0].strip() != "node_id":
        raise ValueError("field CSV must start with a 'node_id,<name>' header")
    entries = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            node, value = int(row[0]), float(row[1])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"field CSV line {lineno}: {exc}") from exc
        if node in entries:
            raise ValueError(f"field CSV line {lineno}: duplicate node {node}")
        entries[node] = value
    n = n_nodes if n_nodes is not None else len(entries)
    if sorted(entries) != list(range(n)):
        raise ValueError(f"field CSV must define nodes 0..{n - 1} exactly once")
    return np.array([entries[i] for i in range(n)])


def save_field(values, path: str | Path, column: str = "delta_T") -> None:
    Path(path).write_text(field_to_csv(values, column))


def load_field(path: str | Path, n_nodes: int | None = None) -> np.ndarray:
    return parse_field_csv(Path(path).read_text(), n_nodes)


def mask_csv(names: list[str], fields: list[np.ndarray], threshold: float) -> str:
    """Per-node 0/1 flags marking values strictly above ``threshold``."""
    lines = ["node_id," + ",".join(names)]
    stacked = np.column_stack([np.asarray(f) > threshold for f in fields]).astype(int)
    lines += [f"{i}," + ",".join(str(v) for v in row) for i, row in enumerate(stacked)]
    return "\n".join(lines) + "\n"


def vtk_legacy(mesh: Mesh, fields: dict[str, np.ndarray], title: str = "thermorecon field") -> str:
    """ASCII legacy VTK unstructured grid with one point-data scalar per field."""
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(title.replace("\n", " ")[:255] + "\n")
    out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {mesh.n_nodes} double\n")
    for p in mesh.nodes.tolist():
        out.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
    size = sum(1 + e.n_nodes for e in mesh.elements)
    out.write(f"CELLS {len(mesh.elements)} {size}\n")
    for e in mesh.elements:
        out.write(f"{e.n_nodes} " + " ".join(str(n) for n in e.nodes) + "\n")
    out.write(f"CELL_TYPES {len(mesh.elements)}\n")
    for e in mesh.elements:
        out.write(f"{VTK_CELL_TYPES[e.kind]}\n")
    out.write(f"POINT_DATA {mesh.n_nodes}\n")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} has {values.size} values for {mesh.n_nodes} nodes")
        out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in values.tolist():
            out.write(f"{v!r}\n")
    return out.getvalue()
