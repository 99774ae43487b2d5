"""Small hand-built meshes shared by the test modules."""

import numpy as np

from thermorecon.fem import LoadCase, NodalLoad
from thermorecon.mesh import DirichletBC, Element, Material, Mesh
from thermorecon.sensors import Sensor, axis_sensors

UNIT = Material(0, rho=1.0, young=1.0, poisson=0.0, alpha=1e-5)


def bar(length=1.0, area=1.0, material=UNIT, clamp_both=False):
    """x-aligned truss from the origin; node 0 clamped, node 1 free along x only."""
    bcs = [DirichletBC(0, "xyz"), DirichletBC(1, "xyz" if clamp_both else "yz")]
    return Mesh([(0, 0, 0), (length, 0, 0)], [Element(0, "truss3d", (0, 1), 0, area)], {0: material}, bcs, 3)


def truss_frame(material=None):
    """Planar-in-3D four-node truss with a free tip, 5 members."""
    material = material or Material(0, 100.0, 10.0, 0.3, 0.5)
    nodes = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)]
    members = [(0, 2), (1, 3), (1, 2), (2, 3), (0, 3)]
    els = [Element(i, "truss3d", m, 0, 0.5 + 0.1 * i) for i, m in enumerate(members)]
    bcs = [DirichletBC(0, "xyz"), DirichletBC(1, "xyz"), DirichletBC(2, "z"), DirichletBC(3, "z")]
    return Mesh(nodes, els, {0: material}, bcs, 3)


def grid_plate(nx, ny, spacing=1.0, material=None, thickness=0.2, clamp_left=True):
    """Structured tri3 plate with ``nx * ny`` squares, each split into two triangles."""
    material = material or Material(0, 10.0, 50.0, 0.25, 0.3)
    nodes = [(i * spacing, j * spacing, 0.0) for j in range(ny + 1) for i in range(nx + 1)]

    def nid(i, j):
        return j * (nx + 1) + i

    els = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            els.append(Element(len(els), "tri3", (a, b, c), 0, thickness))
            els.append(Element(len(els), "tri3", (a, c, d), 0, thickness))
    bcs = [DirichletBC(nid(0, j), "xy") for j in range(ny + 1)] if clamp_left else []
    return Mesh(nodes, els, {0: material}, bcs, 2)


def plate_patch():
    """8-element tri3 patch on a 3 x 3 node grid, slightly distorted."""
    m = grid_plate(2, 2)
    nodes = m.nodes.copy()
    nodes[4] += (0.13, -0.07, 0.0)
    return Mesh(nodes, m.elements, m.materials, m.dirichlet, 2)


KUHN = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7), (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]


def tet_block(nx=2, material=None, clamp=True):
    """``nx`` unit cubes along x, each split into 6 tets (12 elements for nx=2)."""
    material = material or Material(0, 20.0, 80.0, 0.2, 0.4)
    nodes = [(i, j, k) for k in (0, 1) for j in (0, 1) for i in range(nx + 1)]
    index = {p: n for n, p in enumerate(nodes)}
    els = []
    for i in range(nx):
        corners = [index[(i + a, b, c)] for c in (0, 1) for b in (0, 1) for a in (0, 1)]
        for t in KUHN:
            tet = [corners[v] for v in t]
            e = np.array(nodes, dtype=float)[tet[1:]] - np.array(nodes[tet[0]], dtype=float)
            if np.linalg.det(e) < 0:
                tet[1], tet[2] = tet[2], tet[1]
            els.append(Element(len(els), "tet4", tuple(tet), 0))
    bcs = [DirichletBC(n, "xyz") for n, p in enumerate(nodes) if p[0] == 0] if clamp else []
    return Mesh(nodes, els, {0: material}, bcs, 3)


def all_channels(mesh, points, start=0):
    out = []
    for p in points:
        out += axis_sensors(start + len(out), tuple(p) + (0.0,) * (3 - len(p)), mesh.dimension)
    return out


def gradient_fixtures():
    """(mesh, load cases, sensors) triples for gradient checks, mixing displacement and strain channels."""
    rng = np.random.default_rng(7)

    bar_mesh = bar(material=Material(0, 1.0, 2.0, 0.0, 0.5))
    bar_sensors = [
        Sensor(0, (1.0, 0, 0), "displacement", (1.0, 0.0, 0.0), 1.5),
        Sensor(1, (0.4, 0, 0), "displacement", (1.0, 0.0, 0.0), 0.7),
        Sensor(2, (0.5, 0, 0), "strain", (1.0, 0.0, 0.0), 2.0),
    ]
    bar_cases = [LoadCase(0), LoadCase(1, (NodalLoad(1, (0.3, 0.0, 0.0)),))]

    patch = plate_patch()
    pts = [(2.0, 2.0), (1.5, 0.5), (2.0, 0.0), (0.7, 1.6)]
    patch_sensors = all_channels(patch, pts)
    for i, d in enumerate([(1.0, 0.0, 0.0), (0.6, 0.8, 0.0)]):
        patch_sensors.append(Sensor(100 + i, (1.2, 1.1 + 0.3 * i, 0.0), "strain", d, 0.8 + i))
    patch_cases = [LoadCase(0, (NodalLoad(8, (0.5, -0.2, 0.0)),)), LoadCase(1, (), (0.0, -9.81, 0.0))]

    block = tet_block()
    bpts = [(2.0, 1.0, 1.0), (1.5, 0.5, 0.5), (2.0, 0.0, 0.3), (1.0, 1.0, 0.0)]
    block_sensors = all_channels(block, bpts)
    d = rng.normal(size=3)
    block_sensors.append(Sensor(200, (1.3, 0.4, 0.6), "strain", tuple(d / np.linalg.norm(d)), 1.2))
    block_cases = [LoadCase(0, (NodalLoad(11, (0.0, 0.0, -0.4)),), (0.0, 0.0, -9.81))]

    return {
        "bar": (bar_mesh, bar_cases, bar_sensors),
        "plate_patch": (patch, patch_cases, patch_sensors),
        "tet_block": (block, block_cases, block_sensors),
    }
