"""Mesh data model, JSON I/O and the plate-with-a-hole generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

ELEMENT_NODE_COUNT = {"truss3d": 2, "tri3": 3, "tet4": 4}
_AXES = "xyz"


class MeshError(ValueError):
    """Base class for mesh problems."""


class MeshParseError(MeshError):
    """The mesh document does not follow the schema."""


class MeshValidationError(MeshError):
    """The mesh is well-formed but internally inconsistent."""


class GeometryError(MeshError):
    """Generator input describes an impossible geometry."""


@dataclass(frozen=True)
class Material:
    id: int
    rho: float
    young: float
    poisson: float
    alpha: float

    def validate(self) -> None:
        if not self.young > 0:
            raise MeshValidationError(f"material {self.id}: young must be > 0")
        if not -1.0 < self.poisson < 0.5:
            raise MeshValidationError(f"material {self.id}: poisson must lie in (-1, 0.5)")
        if self.alpha < 0 or self.rho < 0:
            raise MeshValidationError(f"material {self.id}: alpha and rho must be >= 0")


@dataclass(frozen=True)
class Element:
    id: int
    kind: str
    nodes: tuple[int, ...]
    material: int
    section: float | None = None  # area (truss3d) or thickness (tri3)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class DirichletBC:
    node: int
    dofs: str  # subset of "xyz"


@dataclass
class Mesh:
    nodes: np.ndarray  # (N, 3) positions
    elements: list[Element]
    materials: dict[int, Material]
    dirichlet: list[DirichletBC] = field(default_factory=list)
    dimension: int = 3

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.nodes.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dimension

    def element_coords(self, element: Element) -> np.ndarray:
        return self.nodes[list(element.nodes)]

    def bbox_size(self) -> float:
        """Diagonal length of the node bounding box."""
        if self.n_nodes == 0:
            return 0.0
        return float(np.linalg.norm(self.nodes.max(axis=0) - self.nodes.min(axis=0)))

    def validate(self) -> None:
        if self.dimension not in (2, 3):
            raise MeshValidationError("dimension must be 2 or 3")
        if not np.all(np.isfinite(self.nodes)):
            raise MeshValidationError("node positions must be finite")
        for mat in self.materials.values():
            mat.validate()
        seen = set()
        for el in self.elements:
            if el.id in seen:
                raise MeshValidationError(f"duplicate element id {el.id}")
            seen.add(el.id)
            if el.kind not in ELEMENT_NODE_COUNT:
                raise MeshValidationError(f"element {el.id}: unknown kind {el.kind!r}")
            if len(el.nodes) != ELEMENT_NODE_COUNT[el.kind]:
                raise MeshValidationError(
                    f"element {el.id}: {el.kind} needs {ELEMENT_NODE_COUNT[el.kind]} nodes"
                )
            if len(set(el.nodes)) != len(el.nodes):
                raise MeshValidationError(f"element {el.id}: repeated node ids")
            for n in el.nodes:
                if not 0 <= n < self.n_nodes:
                    raise MeshValidationError(f"element {el.id}: dangling node reference {n}")
            if el.material not in self.materials:
                raise MeshValidationError(
                    f"element {el.id}: dangling material reference {el.material}"
                )
            if el.kind == "tri3" and self.dimension != 2:
                raise MeshValidationError(f"element {el.id}: tri3 requires a 2-D mesh")
            if el.kind == "tet4" and self.dimension != 3:
                raise MeshValidationError(f"element {el.id}: tet4 requires a 3-D mesh")
            if el.kind in ("truss3d", "tri3"):
                if el.section is None or not el.section > 0:
                    raise MeshValidationError(f"element {el.id}: section must be > 0")
            if not element_measure(el, self.element_coords(el)) > 0:
                raise MeshValidationError(f"element {el.id}: non-positive measure")
        for bc in self.dirichlet:
            if not 0 <= bc.node < self.n_nodes:
                raise MeshValidationError(f"dirichlet: dangling node reference {bc.node}")
            allowed = _AXES[: self.dimension]
            if not bc.dofs or any(c not in allowed for c in bc.dofs):
                raise MeshValidationError(f"dirichlet node {bc.node}: bad dofs {bc.dofs!r}")


def element_measure(element: Element, coords: np.ndarray) -> float:
    """Length, area or volume of the element (unsigned)."""
    if element.kind == "truss3d":
        return float(np.linalg.norm(coords[1] - coords[0]))
    if element.kind == "tri3":
        return abs(signed_area(coords))
    if element.kind == "tet4":
        e = coords[1:] - coords[0]
        return abs(float(np.linalg.det(e))) / 6.0
    raise MeshValidationError(f"unknown element kind {element.kind!r}")


def signed_area(coords: np.ndarray) -> float:
    (x1, y1), (x2, y2), (x3, y3) = coords[:, 0:2]
    return 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))


# ---------------------------------------------------------------- JSON I/O


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise MeshParseError(f"{where}: expected an object")
    if key not in obj:
        raise MeshParseError(f"{where}: missing field {key!r}")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MeshParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MeshParseError(f"{where}: expected an integer, got {value!r}")
    return value


def parse_mesh(text: str | bytes) -> Mesh:
    """Parse and validate a mesh JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise MeshParseError("document: expected an object")

    dimension = _integer(_require(doc, "dimension", "document"), "dimension")
    if dimension not in (2, 3):
        raise MeshParseError(f"dimension: expected 2 or 3, got {dimension}")

    raw_nodes = _require(doc, "nodes", "document")
    if not isinstance(raw_nodes, list):
        raise MeshParseError("nodes: expected a list")
    positions = np.zeros((len(raw_nodes), 3))
    seen = np.zeros(len(raw_nodes), dtype=bool)
    for i, n in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        nid = _integer(_require(n, "id", where), f"{where}.id")
        if not 0 <= nid < len(raw_nodes) or seen[nid]:
            raise MeshValidationError(f"{where}.id: node ids must be dense 0..N-1, got {nid}")
        seen[nid] = True
        positions[nid] = [_number(_require(n, a, where), f"{where}.{a}") for a in _AXES]

    materials = {}
    for i, m in enumerate(_require(doc, "materials", "document")):
        where = f"materials[{i}]"
        mat = Material(
            id=_integer(_require(m, "id", where), f"{where}.id"),
            rho=_number(_require(m, "rho", where), f"{where}.rho"),
            young=_number(_require(m, "young", where), f"{where}.young"),
            poisson=_number(_require(m, "poisson", where), f"{where}.poisson"),
            alpha=_number(_require(m, "alpha", where), f"{where}.alpha"),
        )
        if mat.id in materials:
            raise MeshValidationError(f"{where}.id: duplicate material id {mat.id}")
        materials[mat.id] = mat

    elements = []
    for i, e in enumerate(_require(doc, "elements", "document")):
        where = f"elements[{i}]"
        kind = _require(e, "kind", where)
        if kind not in ELEMENT_NODE_COUNT:
            raise MeshParseError(f"{where}.kind: unknown element kind {kind!r}")
        conn = _require(e, "nodes", where)
        if not isinstance(conn, list):
            raise MeshParseError(f"{where}.nodes: expected a list")
        section = e.get("section")
        elements.append(
            Element(
                id=_integer(_require(e, "id", where), f"{where}.id"),
                kind=kind,
                nodes=tuple(_integer(c, f"{where}.nodes") for c in conn),
                material=_integer(_require(e, "material", where), f"{where}.material"),
                section=None if section is None else _number(section, f"{where}.section"),
            )
        )

    dirichlet = []
    for i, d in enumerate(_require(doc, "dirichlet", "document")):
        where = f"dirichlet[{i}]"
        dofs = _require(d, "dofs", where)
        if not isinstance(dofs, str):
            raise MeshParseError(f"{where}.dofs: expected a string")
        dirichlet.append(DirichletBC(_integer(_require(d, "node", where), f"{where}.node"), dofs))

    mesh = Mesh(positions, elements, materials, dirichlet, dimension)
    mesh.validate()
    return mesh


def mesh_to_dict(mesh: Mesh) -> dict:
    elements = []
    for el in mesh.elements:
        item = {"id": el.id, "kind": el.kind, "nodes": list(el.nodes), "material": el.material}
        if el.section is not None:
            item["section"] = el.section
        elements.append(item)
    return {
        "dimension": mesh.dimension,
        "nodes": [
            {"id": i, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
            for i, p in enumerate(mesh.nodes)
        ],
        "materials": [
            {"id": m.id, "rho": m.rho, "young": m.young, "poisson": m.poisson, "alpha": m.alpha}
            for m in mesh.materials.values()
        ],
        "elements": elements,
        "dirichlet": [{"node": bc.node, "dofs": bc.dofs} for bc in mesh.dirichlet],
    }


def serialize_mesh(mesh: Mesh) -> str:
    return json.dumps(mesh_to_dict(mesh))


def load_mesh(path: str | Path) -> Mesh:
    return parse_mesh(Path(path).read_text())


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    Path(path).write_text(serialize_mesh(mesh))


# ---------------------------------------------------------------- plate generator

HOLE_SEGMENTS = 32


def generate_plate_with_hole(
    length: float,
    height: float,
    hole_diameter: float,
    hole_center: tuple[float, float],
    target_edge_size: float,
    *,
    thickness: float = 0.1,
    material: Material | None = None,
) -> Mesh:
    """Triangulate a rectangle ``[0, length] x [0, height]`` minus a circular hole.

    Points are a structured grid with spacing close to ``target_edge_size``
    plus a 32-gon on the hole boundary; grid points too close to the hole are
    dropped and the point cloud is Delaunay-triangulated. Triangles whose
    centroid falls inside the hole polygon are removed. Nodes on ``x = 0`` are
    clamped in both in-plane directions.
    """
    cx, cy = hole_center
    radius = 0.5 * hole_diameter
    h = target_edge_size
    if not h > 0:
        raise GeometryError("target_edge_size must be > 0")
    if not length > 0 or not height > 0:
        raise GeometryError("plate dimensions must be > 0")
    if not radius > 0:
        raise GeometryError("hole_diameter must be > 0")
    if cx - radius <= 0 or cx + radius >= length or cy - radius <= 0 or cy + radius >= height:
        raise GeometryError("hole must lie strictly inside the plate")
    if material is None:
        material = Material(id=0, rho=7800.0, young=2e12, poisson=0.3, alpha=1e-5)

    nx = max(1, round(length / h))
    ny = max(1, round(height / h))
    gx, gy = np.meshgrid(np.linspace(0, length, nx + 1), np.linspace(0, height, ny + 1))
    grid = np.column_stack([gx.ravel(), gy.ravel()])

    theta = 2 * np.pi * np.arange(HOLE_SEGMENTS) / HOLE_SEGMENTS
    ring = np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)])
    seg_len = 2 * radius * math.sin(math.pi / HOLE_SEGMENTS)
    # keep grid points out of the hole and off the Gabriel disks of the ring edges
    keep_out = radius + max(0.5 * seg_len, 0.35 * h)
    dist = np.hypot(grid[:, 0] - cx, grid[:, 1] - cy)
    points = np.vstack([grid[dist > keep_out], ring])

    tri = Delaunay(points)
    simplices = tri.simplices
    centroids = points[simplices].mean(axis=1)
    inside = _inside_convex_polygon(centroids, ring)
    simplices = simplices[~inside]

    # drop points not referenced by any triangle, renumber
    used = np.unique(simplices)
    renumber = -np.ones(len(points), dtype=int)
    renumber[used] = np.arange(len(used))
    points = points[used]
    simplices = renumber[simplices]

    elements = []
    for eid, (a, b, c) in enumerate(simplices):
        if signed_area(points[[a, b, c]]) < 0:
            b, c = c, b
        elements.append(Element(eid, "tri3", (int(a), int(b), int(c)), material.id, thickness))

    nodes = np.column_stack([points, np.zeros(len(points))])
    tol = 1e-9 * max(length, height)
    dirichlet = [DirichletBC(int(i), "xy") for i in np.flatnonzero(np.abs(nodes[:, 0]) <= tol)]
    mesh = Mesh(nodes, elements, {material.id: material}, dirichlet, dimension=2)
    mesh.validate()
    return mesh


def _inside_convex_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Strict interior test for a counter-clockwise convex polygon."""
    inside = np.ones(len(points), dtype=bool)
    for i in range(len(polygon)):
        a = polygon[i]
        b = polygon[(i + 1) % len(polygon)]
        cross = (b[0] - a[0]) * (points[:, 1] - a[1]) - (b[1] - a[1]) * (points[:, 0] - a[0])
        inside &= cross > 1e-12
    return inside
