"""Command-line interface: ``thermorecon <command> [options]``.

Errors are reported as one JSON line on stderr, prefixed ``thermorecon: error:``,
with exit status 2 for usage errors and 1 for everything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import SCENARIOS, __version__, scenario_path
from .export import field_to_csv, load_field, mask_csv, rmse, vtk_legacy
from .interp import METHODS, SampleSet, interpolate_field
from .mesh import Mesh, generate_plate_with_hole, load_mesh, save_mesh
from .optimize import reconstruct
from .scenario import Scenario, build_problem, load_scenario, run_baseline
from .sensors import MeasurementSet

logger = logging.getLogger("thermorecon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- helpers


def _scenario(arg: str) -> Scenario:
    p = Path(arg)
    if p.exists():
        return load_scenario(p)
    if arg in SCENARIOS:
        return load_scenario(scenario_path(arg))
    raise FileNotFoundError(f"scenario not found: {arg} (bundled: {', '.join(SCENARIOS)})")


def _mesh(args) -> Mesh:
    if getattr(args, "mesh", None):
        return load_mesh(args.mesh)
    if getattr(args, "scenario", None):
        return _scenario(args.scenario).mesh
    raise UsageError("one of --mesh or --scenario is required")


def _write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _measurements(args, sc: Scenario) -> MeasurementSet:
    if getattr(args, "measurements", None):
        return MeasurementSet.from_csv(Path(args.measurements).read_text())
    return sc.measurements(seed=args.seed, noise_stddev=args.noise)


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    mesh = generate_plate_with_hole(
        args.length,
        args.height,
        args.hole_diameter,
        tuple(args.hole_center),
        args.edge_size,
        thickness=args.thickness,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, args.out)
    print(f"nodes={mesh.n_nodes} elements={len(mesh.elements)} out={args.out}")
    return 0


def cmd_synth(args) -> int:
    sc = _scenario(args.scenario)
    m = sc.measurements(seed=args.seed, noise_stddev=args.noise)
    _write(args.out, m.to_csv())
    print(f"cases={len(m.case_ids)} sensors={len(m.sensor_ids)} out={args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    sc = _scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = {"scenario": sc.name, "method": args.method}
    if args.method == "adjoint":
        problem = build_problem(sc, _measurements(args, sc))
        config = sc.optimizer_config(args.max_iter)
        if args.snapshot_every:
            config.snapshot_every = args.snapshot_every
        result = reconstruct(problem, sc.design_map(not args.no_filter), config)
        field = result.delta_t
        _write(out / "convergence.csv", result.convergence_csv())
        for it, snap in sorted(result.snapshots.items()):
            _write(out / f"snapshot_{it:05d}.csv", field_to_csv(snap))
        log.update(
            filter="off" if args.no_filter or not sc.filter.enabled else "on",
            converged="true" if result.converged else "false",
            iterations=result.iterations,
            initial_cost=repr(result.costs[0]),
            final_cost=repr(result.final_cost),
            forward_solves=problem.forward_solves,
            adjoint_solves=problem.adjoint_solves,
            wall_time=f"{result.wall_time:.3f}",
        )
    else:
        field = run_baseline(sc, args.method)
    if sc.has_target:
        log["rmse"] = repr(rmse(field, sc.target_field()))
    _write(out / "field.csv", field_to_csv(field))
    text = "".join(f"{k}={v}\n" for k, v in log.items())
    _write(out / "reconstruct.log", text)
    sys.stdout.write(text)
    return 0


def cmd_interpolate(args) -> int:
    if args.samples:
        text = Path(args.samples).read_text().splitlines()
        table = np.loadtxt(text[1:], delimiter=",", ndmin=2)
        samples = SampleSet(table[:, :3], table[:, 3])
        mesh = _mesh(args)
        params = {"k": args.k} if args.k else {}
        if args.scenario and not args.k:
            params = {k: v for k, v in _scenario(args.scenario).baselines.items() if k in ("k", "weighting", "variogram")}
        field = interpolate_field(mesh, samples, args.method, **params)
    else:
        if not args.scenario:
            raise UsageError("interpolate needs --scenario or --samples with --mesh")
        sc = _scenario(args.scenario)
        if args.k:
            sc.baselines["k"] = args.k
        field = run_baseline(sc, args.method)
    _write(args.out, field_to_csv(field))
    print(f"method={args.method} nodes={len(field)} out={args.out}")
    return 0


def cmd_compare(args) -> int:
    mesh = _mesh(args)
    if len(set(args.fields)) != len(args.fields):
        raise UsageError("each field may be listed once")
    fields = {p: load_field(p, mesh.n_nodes) for p in args.fields}
    if args.reference:
        ref_name, reference = args.reference, load_field(args.reference, mesh.n_nodes)
    elif args.scenario and (sc := _scenario(args.scenario)).has_target:
        ref_name, reference = "target", sc.target_field()
    else:
        ref_name, reference = next(iter(fields.items()))
    rows = [(name, rmse(values, reference)) for name, values in fields.items()]
    width = max(len(n) for n, _ in rows)
    print(f"reference: {ref_name}")
    for name, err in rows:
        print(f"{name:<{width}}  rmse={err:.6g}")
    if args.out:
        _write(args.out, "field,rmse\n" + "".join(f"{n},{e!r}\n" for n, e in rows))
    if args.threshold is not None:
        mask_path = args.mask_out or (Path(args.out).with_suffix(".mask.csv") if args.out else Path("mask.csv"))
        _write(mask_path, mask_csv(list(fields), list(fields.values()), args.threshold))
        print(f"mask(>{args.threshold:g})={mask_path}")
    return 0


def cmd_export_vtk(args) -> int:
    mesh = _mesh(args)
    fields = {}
    for p in args.field:
        header = Path(p).read_text().split("\n", 1)[0].split(",")
        name = header[1].strip() if len(header) > 1 and header[1].strip() else "delta_T"
        if name in fields:
            name = Path(p).stem
        fields[name] = load_field(p, mesh.n_nodes)
    _write(args.out, vtk_legacy(mesh, fields))
    print(f"fields={','.join(fields)} out={args.out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="BLAS/LAPACK thread count (1 = bit-reproducible)")
    common.add_argument("--seed", type=int, default=None, help="seed for measurement noise")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="thermorecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"thermorecon {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="mesh a rectangular plate with a circular hole")
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=float, default=60.0)
    p.add_argument("--height", type=float, default=30.0)
    p.add_argument("--hole-diameter", type=float, default=10.0)
    p.add_argument("--hole-center", type=float, nargs=2, default=(30.0, 15.0))
    p.add_argument("--edge-size", type=float, default=2.0)
    p.add_argument("--thickness", type=float, default=0.1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("synth", parents=[common], help="synthesize measurements from the scenario target")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", type=float, default=None, help="Gaussian noise standard deviation")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reconstruct", parents=[common], help="identify the temperature field")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--method", choices=("adjoint",) + METHODS, default="adjoint")
    p.add_argument("--measurements", help="measurements CSV (default: synthesize from the target)")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--no-filter", action="store_true", help="optimize raw temperatures (no Vertex Morphing or bounds)")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--snapshot-every", type=int, default=0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("interpolate", parents=[common], help="baseline interpolation of sensor temperatures")
    p.add_argument("--scenario")
    p.add_argument("--mesh")
    p.add_argument("--samples", help="samples CSV x,y,z,value (default: target at the sensors)")
    p.add_argument("--method", choices=METHODS, default="knn")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("compare", parents=[common], help="RMSE of nodal fields against a reference")
    p.add_argument("fields", nargs="+")
    p.add_argument("--scenario")
    p.add_argument("--mesh")
    p.add_argument("--reference", help="reference field CSV (default: scenario target, else the first field)")
    p.add_argument("--out", help="RMSE table CSV")
    p.add_argument("--threshold", type=float, default=None, help="also write a node mask of values above this")
    p.add_argument("--mask-out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-vtk", parents=[common], help="write fields as legacy ASCII VTK")
    p.add_argument("--scenario")
    p.add_argument("--mesh")
    p.add_argument("--field", action="append", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_vtk)
    return parser


def _fail(command: str | None, kind: str, message: str, code: int) -> int:
    payload = {"command": command, "error": kind, "message": " ".join(str(message).split())}
    sys.stderr.write("thermorecon: error: " + json.dumps(payload) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(None, "usage", str(exc), 2)
    if not args.command:
        return _fail(None, "usage", "a command is required", 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except UsageError as exc:
        return _fail(args.command, "usage", str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - reported as a single line
        logger.debug("command failed", exc_info=True)
        return _fail(args.command, type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
