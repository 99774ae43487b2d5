"""Linear elastic elements, thermal loads, assembly and the SPD solve."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Element, Material, Mesh, element_measure, signed_area

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
DIRECT_SOLVER_MAX_DOFS = 50_000


class SingularGeometryError(ValueError):
    """Element with zero length, area or volume."""


class SolverError(RuntimeError):
    """The reduced stiffness matrix is not SPD or the solve did not meet tolerance."""


# ---------------------------------------------------------------- load cases


@dataclass(frozen=True)
class NodalLoad:
    node: int
    force: tuple[float, float, float]


@dataclass(frozen=True)
class LoadCase:
    id: int
    nodal_loads: tuple[NodalLoad, ...] = ()
    body_force: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def validate(self, mesh: Mesh) -> None:
        for load in self.nodal_loads:
            if not 0 <= load.node < mesh.n_nodes:
                raise ValueError(f"load case {self.id}: dangling node {load.node}")
            if not np.all(np.isfinite(load.force)):
                raise ValueError(f"load case {self.id}: non-finite force at node {load.node}")
        if not np.all(np.isfinite(self.body_force)):
            raise ValueError(f"load case {self.id}: non-finite body force")


def parse_load_case(text: str | bytes) -> LoadCase:
    doc = json.loads(text)
    try:
        loads = tuple(
            NodalLoad(int(item["node"]), tuple(float(v) for v in item["f"]))
            for item in doc.get("nodal_loads", [])
        )
        body = tuple(float(v) for v in doc.get("body_force", (0.0, 0.0, 0.0)))
        case = LoadCase(int(doc["id"]), loads, body)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed load case: {exc}") from exc
    if any(len(l.force) != 3 for l in loads) or len(body) != 3:
        raise ValueError("malformed load case: force vectors need 3 components")
    return case


def load_case_to_dict(case: LoadCase) -> dict:
    return {
        "id": case.id,
        "nodal_loads": [{"node": l.node, "f": list(l.force)} for l in case.nodal_loads],
        "body_force": list(case.body_force),
    }


def load_load_case(path: str | Path) -> LoadCase:
    return parse_load_case(Path(path).read_text())


def save_load_case(case: LoadCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(load_case_to_dict(case)))


# ---------------------------------------------------------------- element kernels


def _plane_stress_d(mat: Material) -> np.ndarray:
    e, nu = mat.young, mat.poisson
    return e / (1 - nu**2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])


def _solid_d(mat: Material) -> np.ndarray:
    e, nu = mat.young, mat.poisson
    lam = e * nu / ((1 + nu) * (1 - 2 * nu))
    mu = e / (2 * (1 + nu))
    d = np.zeros((6, 6))
    d[:3, :3] = lam
    d[:3, :3] += 2 * mu * np.eye(3)
    d[3:, 3:] = mu * np.eye(3)
    return d


def _tri3_b(coords: np.ndarray) -> tuple[np.ndarray, float]:
    area = signed_area(coords)
    if abs(area) <= 1e-14 * max(1.0, float(np.ptp(coords[:, :2])) ** 2):
        raise SingularGeometryError("tri3 element with zero area")
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]]) / (2 * area)
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]]) / (2 * area)
    bm = np.zeros((3, 6))
    bm[0, 0::2] = b
    bm[1, 1::2] = c
    bm[2, 0::2] = c
    bm[2, 1::2] = b
    return bm, abs(area)


def _tet4_grads(coords: np.ndarray) -> tuple[np.ndarray, float]:
    m = np.column_stack([np.ones(4), coords])
    det = np.linalg.det(m)
    if abs(det) <= 1e-14 * max(1.0, float(np.ptp(coords))) ** 3:
        raise SingularGeometryError("tet4 element with zero volume")
    inv = np.linalg.inv(m)
    return inv[1:, :].T, abs(det) / 6.0  # (4, 3) shape-function gradients


def _tet4_b(coords: np.ndarray) -> tuple[np.ndarray, float]:
    g, vol = _tet4_grads(coords)
    bm = np.zeros((6, 12))
    for a in range(4):
        gx, gy, gz = g[a]
        c = 3 * a
        bm[0, c] = gx
        bm[1, c + 1] = gy
        bm[2, c + 2] = gz
        bm[3, c], bm[3, c + 1] = gy, gx
        bm[4, c + 1], bm[4, c + 2] = gz, gy
        bm[5, c], bm[5, c + 2] = gz, gx
    return bm, vol


def _truss_axis(coords: np.ndarray, dim: int) -> tuple[np.ndarray, float]:
    delta = coords[1, :dim] - coords[0, :dim]
    length = float(np.linalg.norm(delta))
    if length <= 1e-14 * max(1.0, float(np.abs(coords).max())):
        raise SingularGeometryError("truss element with zero length")
    return delta / length, length


def strain_matrix(element: Element, coords: np.ndarray, dim: int) -> tuple[np.ndarray, float]:
    """Constant strain-displacement matrix and element volume.

    Rows are engineering strains: axial (truss), ``[xx, yy, xy]`` (tri3) or
    ``[xx, yy, zz, xy, yz, zx]`` (tet4).
    """
    if element.kind == "truss3d":
        t, length = _truss_axis(coords, dim)
        return np.concatenate([-t, t])[None, :] / length, length * element.section
    if element.kind == "tri3":
        bm, area = _tri3_b(coords)
        return bm, area * element.section
    if element.kind == "tet4":
        return _tet4_b(coords)
    raise ValueError(f"unknown element kind {element.kind!r}")


def _constitutive(element: Element, mat: Material) -> tuple[np.ndarray, np.ndarray]:
    """Material matrix and unit thermal strain vector for the element kind."""
    if element.kind == "truss3d":
        return np.array([[mat.young]]), np.array([1.0])
    if element.kind == "tri3":
        return _plane_stress_d(mat), np.array([1.0, 1.0, 0.0])
    return _solid_d(mat), np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def element_stiffness(element: Element, material: Material, coords: np.ndarray, dim: int = 3) -> np.ndarray:
    bm, vol = strain_matrix(element, coords, dim)
    d, _ = _constitutive(element, material)
    ke = vol * bm.T @ d @ bm
    return 0.5 * (ke + ke.T)


def unit_thermal_force(element: Element, material: Material, coords: np.ndarray, dim: int = 3) -> np.ndarray:
    """Element load vector for a unit average temperature change."""
    bm, vol = strain_matrix(element, coords, dim)
    d, m = _constitutive(element, material)
    return vol * material.alpha * (bm.T @ (d @ m))


def thermal_force(element: Element, material: Material, coords: np.ndarray, nodal_dt, dim: int = 3) -> np.ndarray:
    """Equivalent nodal thermal load from the element-average temperature change."""
    nodal_dt = np.asarray(nodal_dt, dtype=float)
    if nodal_dt.shape != (element.n_nodes,):
        raise ValueError(f"expected {element.n_nodes} nodal temperatures, got {nodal_dt.shape}")
    return unit_thermal_force(element, material, coords, dim) * nodal_dt.mean()


def truss_axial_force(element: Element, material: Material, coords: np.ndarray, u_e, nodal_dt, dim: int = 3) -> float:
    """Axial force (tension positive) of a truss given its nodal displacements."""
    bm, _ = strain_matrix(element, coords, dim)
    strain = float((bm @ np.asarray(u_e, dtype=float).ravel())[0])
    return material.young * element.section * (strain - material.alpha * float(np.mean(nodal_dt)))


# ---------------------------------------------------------------- dofs & assembly


@dataclass(frozen=True)
class DofMap:
    """Global dof ``node * dim + component``; ``free`` lists unconstrained dofs."""

    dim: int
    n_nodes: int
    free: np.ndarray
    constrained: np.ndarray  # bool mask over all dofs

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dim

    @property
    def n_free(self) -> int:
        return len(self.free)

    def free_index(self, node: int, component: int) -> int | None:
        g = node * self.dim + component
        if self.constrained[g]:
            return None
        return int(np.searchsorted(self.free, g))

    def expand(self, free_values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_dofs)
        full[self.free] = free_values
        return full


def build_dof_map(mesh: Mesh) -> DofMap:
    dim = mesh.dimension
    constrained = np.zeros(mesh.n_nodes * dim, dtype=bool)
    for bc in mesh.dirichlet:
        for c in bc.dofs:
            constrained[bc.node * dim + "xyz".index(c)] = True
    return DofMap(dim, mesh.n_nodes, np.flatnonzero(~constrained), constrained)


def _element_dofs(element: Element, dim: int) -> np.ndarray:
    return (np.asarray(element.nodes)[:, None] * dim + np.arange(dim)).ravel()


def assemble_stiffness(mesh: Mesh, dofmap: DofMap | None = None) -> sp.csc_matrix:
    """Reduced stiffness over free dofs (row/column elimination)."""
    dofmap = dofmap or build_dof_map(mesh)
    dim = mesh.dimension
    rows, cols, vals = [], [], []
    for el in mesh.elements:
        ke = element_stiffness(el, mesh.materials[el.material], mesh.element_coords(el), dim)
        dofs = _element_dofs(el, dim)
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(ke.ravel())
    n = dofmap.n_dofs
    if rows:
        k = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    else:
        k = sp.coo_matrix((n, n))
    k = k.tocsc()[dofmap.free][:, dofmap.free]
    # duplicate summation order differs between (i, j) and (j, i); mirror for exact symmetry
    upper = sp.triu(k, format="csc")
    return (upper + sp.triu(k, k=1, format="csc").T).tocsc()


def thermal_load_matrix(mesh: Mesh, dofmap: DofMap | None = None) -> sp.csr_matrix:
    """Sensitivity of the reduced thermal load to nodal temperature changes.

    ``f_thermal = G @ dT``; column ``j`` collects, from every element touching
    node ``j``, that element's unit thermal load divided by its node count.
    """
    dofmap = dofmap or build_dof_map(mesh)
    dim = mesh.dimension
    rows, cols, vals = [], [], []
    for el in mesh.elements:
        h = unit_thermal_force(el, mesh.materials[el.material], mesh.element_coords(el), dim)
        dofs = _element_dofs(el, dim)
        nn = el.n_nodes
        rows.append(np.tile(dofs, nn))
        cols.append(np.repeat(np.asarray(el.nodes), len(dofs)))
        vals.append(np.tile(h / nn, nn))
    n = dofmap.n_dofs
    if rows:
        g = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, mesh.n_nodes)
        )
    else:
        g = sp.coo_matrix((n, mesh.n_nodes))
    return g.tocsr()[dofmap.free]


def external_load(mesh: Mesh, load_case: LoadCase, dofmap: DofMap | None = None) -> np.ndarray:
    """Reduced external load: nodal forces plus body force lumped equally per node."""
    dofmap = dofmap or build_dof_map(mesh)
    load_case.validate(mesh)
    dim = mesh.dimension
    f = np.zeros(dofmap.n_dofs)
    for load in load_case.nodal_loads:
        f[load.node * dim : load.node * dim + dim] += np.asarray(load.force[:dim])
    accel = np.asarray(load_case.body_force[:dim], dtype=float)
    if np.any(accel):
        for el in mesh.elements:
            coords = mesh.element_coords(el)
            vol = element_measure(el, coords) * (el.section if el.kind != "tet4" else 1.0)
            share = mesh.materials[el.material].rho * vol / el.n_nodes * accel
            for n in el.nodes:
                f[n * dim : n * dim + dim] += share
    return f[dofmap.free]


@dataclass
class AssembledSystem:
    stiffness: sp.csc_matrix
    rhs: np.ndarray
    dofmap: DofMap


def assemble(mesh: Mesh, load_case: LoadCase, delta_t) -> AssembledSystem:
    delta_t = np.asarray(delta_t, dtype=float)
    if delta_t.shape != (mesh.n_nodes,):
        raise ValueError(f"temperature field needs {mesh.n_nodes} nodal values")
    dofmap = build_dof_map(mesh)
    k = assemble_stiffness(mesh, dofmap)
    rhs = external_load(mesh, load_case, dofmap) + thermal_load_matrix(mesh, dofmap) @ delta_t
    return AssembledSystem(k, rhs, dofmap)


# ---------------------------------------------------------------- linear solve


@dataclass
class SPDSolver:
    """Factor a reduced stiffness once and reuse it for forward and adjoint solves.

    Below ``DIRECT_SOLVER_MAX_DOFS`` a sparse LDL^T-equivalent factorization is
    used: SuperLU with a symmetric fill-reducing ordering and diagonal pivoting
    only. All pivots must be positive, which certifies positive definiteness.
    Larger systems use Jacobi-preconditioned conjugate gradients.
    """

    matrix: sp.csc_matrix
    method: str = field(init=False)
    _lu: object = field(init=False, default=None, repr=False)
    _jacobi: np.ndarray | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.matrix = sp.csc_matrix(self.matrix)
        n = self.matrix.shape[0]
        if n == 0:
            self.method = "empty"
            return
        diag = self.matrix.diagonal()
        if np.any(diag <= 0):
            bad = int(np.flatnonzero(diag <= 0)[0])
            raise SolverError(f"not positive definite: diagonal entry {bad} = {diag[bad]:.3e}")
        if n <= DIRECT_SOLVER_MAX_DOFS:
            self.method = "cholesky"
            try:
                lu = spla.splu(
                    self.matrix,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except RuntimeError as exc:
                raise SolverError(f"factorization breakdown: {exc}") from exc
            if not np.array_equal(lu.perm_r, lu.perm_c):
                raise SolverError("factorization left the symmetric pivot order")
            pivots = lu.U.diagonal()
            if np.any(pivots <= 0) or not np.all(np.isfinite(pivots)):
                i = int(np.argmin(pivots))
                raise SolverError(f"not positive definite: pivot {i} = {pivots[i]:.3e}")
            self._lu = lu
        else:
            self.method = "pcg"
            self._jacobi = 1.0 / diag

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.size:
            raise ValueError(f"rhs has {rhs.shape[0]} entries, system has {self.size}")
        if self.size == 0:
            return np.zeros(0)
        if self.method == "cholesky":
            x = self._lu.solve(rhs)
            # one step of refinement keeps badly scaled systems inside tolerance
            if self.relative_residual(x, rhs) > RESIDUAL_TOL:
                x = x + self._lu.solve(rhs - self.matrix @ x)
        else:
            m = spla.LinearOperator(self.matrix.shape, matvec=lambda v: self._jacobi * v)
            x, info = spla.cg(self.matrix, rhs, M=m, rtol=1e-13, atol=0.0, maxiter=20 * self.size)
            if info != 0:
                raise SolverError(f"conjugate gradients did not converge (info={info})")
        res = self.relative_residual(x, rhs)
        if res > RESIDUAL_TOL:
            raise SolverError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g} ({self.method})")
        return x

    def relative_residual(self, x: np.ndarray, rhs: np.ndarray) -> float:
        scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
        return float(np.linalg.norm(rhs - self.matrix @ x)) / scale


def solve_linear(system: AssembledSystem) -> np.ndarray:
    return SPDSolver(system.stiffness).solve(system.rhs)


# ---------------------------------------------------------------- forward problem


@dataclass
class DisplacementField:
    values: np.ndarray  # (N, 3), zero at constrained components

    def to_csv(self) -> str:
        lines = ["node_id,ux,uy,uz"]
        lines += [f"{i},{u[0]!r},{u[1]!r},{u[2]!r}" for i, u in enumerate(self.values.tolist())]
        return "\n".join(lines) + "\n"


def displacement_field(dofmap: DofMap, free_values: np.ndarray) -> DisplacementField:
    full = dofmap.expand(free_values).reshape(dofmap.n_nodes, dofmap.dim)
    out = np.zeros((dofmap.n_nodes, 3))
    out[:, : dofmap.dim] = full
    return DisplacementField(out)


def forward_solve(mesh: Mesh, load_case: LoadCase, delta_t) -> DisplacementField:
    system = assemble(mesh, load_case, delta_t)
    u = solve_linear(system)
    residual = system.rhs - system.stiffness @ u
    scale = max(float(np.linalg.norm(system.rhs)), np.finfo(float).tiny)
    if system.rhs.size and np.linalg.norm(residual) / scale > RESIDUAL_TOL:
        raise SolverError("equilibrium residual check failed")
    return displacement_field(system.dofmap, u)
