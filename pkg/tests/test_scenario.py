import json
import shutil

import numpy as np
import pytest

from helpers import bar, grid_plate, tet_block, truss_frame
from thermorecon import SCENARIOS, data_path, scenario_path
from thermorecon.export import (
    field_to_csv,
    load_field,
    mask_csv,
    parse_field_csv,
    rmse,
    save_field,
    vtk_legacy,
)
from thermorecon.scenario import ScenarioError, evaluate_target, load_scenario, parse_scenario, run_reconstruction

# ---------------------------------------------------------------- rmse


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [1.0, -1.0]) == 1.0
    assert rmse([0.0], [1.5]) == 1.5


def test_rmse_node_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        rmse([], [])


# ---------------------------------------------------------------- field csv


def test_field_csv_round_trip(tmp_path):
    values = np.random.default_rng(0).normal(size=7)
    assert field_to_csv(values).startswith("node_id,delta_T\n0,")
    save_field(values, tmp_path / "f.csv")
    assert np.array_equal(load_field(tmp_path / "f.csv", 7), values)


@pytest.mark.parametrize(
    "text",
    ["x,delta_T\n0,1\n", "node_id,delta_T\n0,1\n2,3\n", "node_id,delta_T\n0,abc\n", "node_id,delta_T\n0,1\n0,2\n"],
)
def test_field_csv_errors(text):
    with pytest.raises(ValueError):
        parse_field_csv(text)


def test_field_csv_node_count_enforced():
    with pytest.raises(ValueError):
        parse_field_csv("node_id,delta_T\n0,1\n1,2\n", n_nodes=3)


def test_mask_csv():
    text = mask_csv(["a", "b"], [np.array([0.0, 6.0]), np.array([5.0, 5.1])], 5.0)
    assert text == "node_id,a,b\n0,0,0\n1,1,1\n"


# ---------------------------------------------------------------- vtk


@pytest.mark.parametrize("factory, cell_type", [(bar, 3), (lambda: grid_plate(2, 2), 5), (tet_block, 10)])
def test_vtk_structure(factory, cell_type):
    mesh = factory()
    text = vtk_legacy(mesh, {"delta_T": np.arange(mesh.n_nodes, dtype=float)})
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2:4] == ["ASCII", "DATASET UNSTRUCTURED_GRID"]
    assert lines[4] == f"POINTS {mesh.n_nodes} double"
    n_el = len(mesh.elements)
    i = lines.index(f"CELL_TYPES {n_el}")
    assert set(lines[i + 1 : i + 1 + n_el]) == {str(cell_type)}
    assert f"POINT_DATA {mesh.n_nodes}" in lines
    assert "SCALARS delta_T double 1" in lines


def test_vtk_rejects_wrong_length():
    with pytest.raises(ValueError):
        vtk_legacy(truss_frame(), {"x": np.zeros(2)})


# ---------------------------------------------------------------- scenarios


@pytest.mark.parametrize("name", SCENARIOS)
def test_bundled_scenarios_load(name):
    sc = load_scenario(scenario_path(name))
    assert sc.name == name
    assert sc.mesh.n_nodes > 0
    assert len(sc.load_cases) >= 1
    assert sc.target_field().shape == (sc.mesh.n_nodes,)
    sc.optimizer_config()


def test_bar_scenario_reconstructs():
    result = run_reconstruction(load_scenario(scenario_path("bar-1")))
    assert result.converged


@pytest.fixture
def scenario_dir(tmp_path):
    for name in ("bar1.mesh.json", "bar1.load.json", "bar1.sensors.json"):
        shutil.copy(data_path(name), tmp_path / name)
    doc = {
        "name": "t",
        "mesh": "bar1.mesh.json",
        "load_cases": ["bar1.load.json"],
        "sensors": "bar1.sensors.json",
        "target": {"default": 10.0},
        "optimizer": {"max_step": 100.0},
    }
    return tmp_path, doc


def test_parse_minimal_scenario(scenario_dir):
    base, doc = scenario_dir
    sc = parse_scenario(doc, base)
    assert sc.filter.enabled and sc.optimizer_config().max_step == 100.0
    assert np.all(sc.target_field() == 10.0)


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.pop("mesh"), "missing key"),
        (lambda d: d.update(mesh="nope.json"), "not found"),
        (lambda d: d.update(measurements="bar1.load.json"), "exactly one"),
        (lambda d: d.pop("target"), "exactly one"),
        (lambda d: d["optimizer"].update(learning_rate=1.0), "unknown keys"),
        (lambda d: d["optimizer"].pop("max_step"), "max_step"),
        (lambda d: d.update(load_cases=[]), "non-empty"),
        (lambda d: d.update(target={"something": 1}), "target"),
    ],
)
def test_scenario_validation(scenario_dir, mutate, message):
    base, doc = scenario_dir
    mutate(doc)
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(doc, base)


def test_scenario_invalid_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        load_scenario(p)


def test_measurements_scenario_has_no_target(scenario_dir):
    base, doc = scenario_dir
    (base / "m.csv").write_text("case_id,sensor_id,value\n0,0,0.0001\n")
    doc.pop("target")
    doc["measurements"] = "m.csv"
    sc = parse_scenario(doc, base)
    assert not sc.has_target
    assert sc.measurements().values.tolist() == [[1e-4]]
    with pytest.raises(ScenarioError):
        sc.target_field()


def test_target_regions_and_override():
    mesh = grid_plate(4, 2)
    spec = {
        "default": 1.0,
        "regions": [{"lo": [1, None, None], "hi": [None, None, None], "value": 5.0}, {"lo": [3, 1, None], "hi": [None, None, None], "value": 9.0}],
    }
    out = evaluate_target(spec, mesh)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    expected = np.where(x < 1, 1.0, np.where((x >= 3) & (y >= 1), 9.0, 5.0))
    assert np.array_equal(out, expected)


def test_target_from_csv(tmp_path):
    mesh = truss_frame()
    save_field(np.arange(4.0), tmp_path / "t.csv")
    assert evaluate_target({"csv": "t.csv"}, mesh, tmp_path).tolist() == [0.0, 1.0, 2.0, 3.0]


def test_bundled_scenario_json_is_self_contained():
    doc = json.loads(scenario_path("plate-14").read_text())
    assert not any(str(v).startswith("/") for v in (doc["mesh"], doc["sensors"], *doc["load_cases"]))
