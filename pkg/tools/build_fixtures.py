"""Regenerate the data files under src/thermorecon/data.

Run from the repository root: ``python tools/build_fixtures.py``.
"""

import json
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(HERE.parent / "src"))

import bridge_geometry  # noqa: E402
import dam_geometry  # noqa: E402

from thermorecon.export import save_field  # noqa: E402
from thermorecon.fem import LoadCase, NodalLoad, save_load_case  # noqa: E402
from thermorecon.mesh import DirichletBC, Element, Material, Mesh, generate_plate_with_hole, save_mesh  # noqa: E402
from thermorecon.sensors import axis_sensors, save_sensors  # noqa: E402

DATA = HERE.parent / "src" / "thermorecon" / "data"


def write_json(name, doc):
    (DATA / name).write_text(json.dumps(doc, indent=1) + "\n")


def sensors_at(points, dimension):
    out = []
    for p in points:
        p = tuple(float(v) for v in p) + (0.0,) * (3 - len(p))
        out += axis_sensors(len(out), p, dimension)
    return out


def scenario(name, mesh, load, sensors, target, filt, optimizer, baselines):
    write_json(
        f"{name}.scenario.json",
        {
            "name": name,
            "mesh": mesh,
            "load_cases": [load],
            "sensors": sensors,
            "target": target,
            "filter": filt,
            "optimizer": optimizer,
            "baselines": baselines,
        },
    )


def bar():
    mat = Material(0, 7800.0, 2.0e11, 0.3, 1.0e-5)
    mesh = Mesh(
        [(0, 0, 0), (1, 0, 0)],
        [Element(0, "truss3d", (0, 1), 0, 1.0e-4)],
        {0: mat},
        [DirichletBC(0, "xyz"), DirichletBC(1, "yz")],
        3,
    )
    save_mesh(mesh, DATA / "bar1.mesh.json")
    save_load_case(LoadCase(0), DATA / "bar1.load.json")
    save_sensors(sensors_at([(1, 0, 0)], 1), DATA / "bar1.sensors.json")
    scenario(
        "bar-1",
        "bar1.mesh.json",
        "bar1.load.json",
        "bar1.sensors.json",
        {"default": 10.0},
        {"enabled": False},
        {"max_step": 100.0, "max_iterations": 10},
        {"k": 1},
    )


PLATE_14 = [(6, 28), (18, 28), (30, 28), (42, 28), (54, 28), (6, 15), (18, 15), (42, 15), (54, 15),
            (6, 2), (18, 2), (30, 2), (42, 2), (54, 2)]
PLATE_6 = [(10, 25), (30, 25), (50, 25), (10, 5), (30, 5), (50, 5)]


def plate():
    mesh = generate_plate_with_hole(60.0, 30.0, 10.0, (30.0, 15.0), 2.0)
    save_mesh(mesh, DATA / "plate.mesh.json")
    right = np.flatnonzero(np.abs(mesh.nodes[:, 0] - 60.0) < 1e-9)
    share = 1.0e5 / len(right)
    save_load_case(LoadCase(0, tuple(NodalLoad(int(n), (share, 0.0, 0.0)) for n in right)), DATA / "plate.load.json")
    target = {"default": 0.0, "regions": [{"lo": [15, 26, None], "hi": [20, 30, None], "value": 10.0}]}
    for count, pts in ((6, PLATE_6), (14, PLATE_14)):
        save_sensors(sensors_at(pts, 2), DATA / f"plate-{count}.sensors.json")
        scenario(
            f"plate-{count}",
            "plate.mesh.json",
            "plate.load.json",
            f"plate-{count}.sensors.json",
            target,
            {"enabled": True, "radius": 5.0, "bounds": [-5.0, 15.0], "beta": 1.0},
            {"max_step": 2.5e-3, "max_iterations": 5000, "convergence_factor": 1e-5},
            {"k": 3, "variogram": "gaussian"},
        )


def bridge():
    nodes, members, supports = bridge_geometry.build()
    mat = Material(0, 7800.0, 2.0e11, 0.3, 1.0e-5)
    elements = [Element(i, "truss3d", (a, b), 0, area) for i, (a, b, area) in enumerate(members)]
    mesh = Mesh(nodes, elements, {0: mat}, [DirichletBC(s, "xyz") for s in supports], 3)
    save_mesh(mesh, DATA / "bridge.mesh.json")
    save_load_case(LoadCase(0, (), (0.0, 0.0, -9.81)), DATA / "bridge.load.json")
    top = bridge_geometry.top_height
    layouts = {
        20: [(x, 0, 0) for x in (-16, -8, 0, 8, 16)] + [(x, 0, top(x)) for x in (-12, -4, 0, 4, 12)],
        8: [(x, 0, 0) for x in (-12, 12)] + [(x, 0, top(x)) for x in (-4, 4)],
    }
    # front truss plane y = 0, heated right of midspan
    target = {"default": 0.0, "regions": [{"lo": [0.01, None, None], "hi": [None, 0.01, None], "value": 10.0}]}
    for count, pts in layouts.items():
        pts = pts + [(p[0], bridge_geometry.WIDTH, p[2]) for p in pts]
        save_sensors(sensors_at(pts, 3), DATA / f"bridge-{count}.sensors.json")
        scenario(
            f"bridge-{count}",
            "bridge.mesh.json",
            "bridge.load.json",
            f"bridge-{count}.sensors.json",
            target,
            {"enabled": True, "radius": 6.0, "bounds": [-5.0, 15.0], "beta": 1.0},
            {"max_step": 2.5e-2, "max_iterations": 5000, "convergence_factor": 1e-5},
            {"k": 3, "variogram": "gaussian"},
        )


def dam():
    nodes, tets, fixed, symmetric, upstream = dam_geometry.build()
    mat = Material(0, 2400.0, 3.0e10, 0.15, 1.0e-5)
    elements = [Element(i, "tet4", t, 0) for i, t in enumerate(tets)]
    bcs = [DirichletBC(n, "xyz") for n in fixed] + [DirichletBC(n, "z") for n in symmetric]
    save_mesh(Mesh(nodes, elements, {0: mat}, bcs, 3), DATA / "dam.mesh.json")
    forces = dam_geometry.hydrostatic_loads(nodes, upstream)
    loaded = np.flatnonzero(np.abs(forces).sum(axis=1) > 0)
    case = LoadCase(0, tuple(NodalLoad(int(n), tuple(float(v) for v in forces[n])) for n in loaded), (0.0, -9.81, 0.0))
    save_load_case(case, DATA / "dam.load.json")
    save_field(dam_geometry.target_temperature(nodes), DATA / "dam.target.csv")
    for name in ("27", "36", "59"):
        save_sensors(sensors_at(dam_geometry.layout(name), 3), DATA / f"dam-{name}.sensors.json")
        scenario(
            f"dam-reduced-{name}",
            "dam.mesh.json",
            "dam.load.json",
            f"dam-{name}.sensors.json",
            {"csv": "dam.target.csv"},
            {"enabled": True, "radius": 50.0, "bounds": [-10.0, 30.0], "beta": 1.0},
            {"max_step": 0.1, "max_iterations": 5000, "convergence_factor": 1e-5},
            {"k": 5, "variogram": "gaussian"},
        )


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    bar()
    plate()
    bridge()
    dam()
    print("\n".join(sorted(p.name for p in DATA.iterdir())))
