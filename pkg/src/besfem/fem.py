"""Transient 3D heat conduction on a voxel hexahedral mesh.

Trilinear bricks, 2x2x2 Gauss stiffness, row-sum lumped capacity, Robin
exterior faces and a theta time scheme solved by Jacobi-preconditioned
conjugate gradients. Every cell is a cube of edge ``h``; nodes are indexed
``(i, j, k)`` along ``(x, y, z)`` in C order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .model import BoxGeometry, Material, RHO_AIR, C_AIR

SHELL, CORE = 0, 1
FACES = ("x-", "x+", "y-", "y+", "z-", "z+")

_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)))  # (8, 3), local (a, b, c)


class MeshError(ValueError):
    pass


class CGError(RuntimeError):
    def __init__(self, message, residuals):
        self.residuals = list(residuals)
        tail = ", ".join(f"{r:.2e}" for r in self.residuals[-5:])
        super().__init__(f"{message}; last residuals: {tail}")


@dataclass(frozen=True)
class Mesh:
    n: int  # cells per edge
    h: float  # cell size, m
    material: np.ndarray  # (n, n, n) int material id per cell

    @property
    def edge(self) -> float:
        return self.n * self.h

    @property
    def n_nodes(self) -> int:
        return (self.n + 1) ** 3

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def node_coordinates(self) -> np.ndarray:
        x = np.arange(self.n + 1) * self.h
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def cell_nodes(self) -> np.ndarray:
        """Global node index of the 8 corners of every cell, shape (n**3, 8)."""
        n1 = self.n + 1
        i, j, k = np.meshgrid(*(np.arange(self.n),) * 3, indexing="ij")
        i, j, k = i.ravel(), j.ravel(), k.ravel()
        return np.stack(
            [((i + a) * n1 + (j + b)) * n1 + (k + c) for a, b, c in _CORNERS], axis=1
        )


def build_box_mesh(geom: BoxGeometry, n: int) -> Mesh:
    """Voxel mesh of the box: shell cells within ``wall_thickness`` of a face, core elsewhere."""
    if n < 3:
        raise MeshError("need at least 3 cells per edge")
    h = geom.outer_edge / n
    layers = geom.wall_thickness / h
    m = round(layers)
    if abs(layers - m) > 1e-9 or m < 1:
        raise MeshError(
            f"wall thickness {geom.wall_thickness} is not a whole number of cells of size {h:.6g}; "
            f"try n = {suggest_mesh_n(geom, n)}"
        )
    if 2 * m >= n:
        raise MeshError("no core cells left")
    mat = np.full((n, n, n), SHELL, dtype=np.int8)
    mat[m:n - m, m:n - m, m:n - m] = CORE
    return Mesh(n, h, mat)


def suggest_mesh_n(geom: BoxGeometry, n: int) -> int | None:
    """Nearest cell count that gives integer wall layers, or None."""
    best = None
    for cand in range(3, 4 * n + 40):
        layers = geom.wall_thickness * cand / geom.outer_edge
        if abs(layers - round(layers)) < 1e-9 and round(layers) >= 1 and 2 * round(layers) < cand:
            if best is None or abs(cand - n) < abs(best - n):
                best = cand
    return best


def uniform_mesh(n: int, edge: float, material_id: int = 0) -> Mesh:
    return Mesh(n, edge / n, np.full((n, n, n), material_id, dtype=np.int8))


def equivalent_air_conductivity(d: float, R: float) -> float:
    """Solid conductivity standing in for exchange across an air layer: ``d / R``."""
    if d <= 0 or R <= 0:
        raise ValueError("d and R must be > 0")
    return d / R


@dataclass(frozen=True)
class MaterialField:
    k: Mapping[int, float]  # W/(m K)
    rho_c: Mapping[int, float]  # J/(m3 K)

    @classmethod
    def for_box(cls, geom: BoxGeometry) -> "MaterialField":
        """Shell from the wall material, core as air with ``k = air_k_eq``."""
        wall: Material = geom.wall_material
        return cls({SHELL: wall.conductivity, CORE: geom.air_k_eq},
                   {SHELL: wall.rho_c, CORE: RHO_AIR * C_AIR})

    def arrays(self, mesh: Mesh):
        ids = mesh.material.ravel()
        k = np.vectorize(lambda i: self.k[int(i)], otypes=[float])(ids)
        rc = np.vectorize(lambda i: self.rho_c[int(i)], otypes=[float])(ids)
        if np.any(k <= 0) or np.any(rc <= 0):
            raise ValueError("material properties must be > 0")
        return k, rc


# -- element matrices ---------------------------------------------------------------

def unit_brick_stiffness() -> np.ndarray:
    """8x8 stiffness of a unit cube with k = 1, 2x2x2 Gauss quadrature."""
    g = 0.5 + np.array([-1.0, 1.0]) / (2.0 * np.sqrt(3.0))
    Ke = np.zeros((8, 8))
    for xi, eta, zeta in itertools.product(g, g, g):
        p = np.array([xi, eta, zeta])
        grads = np.empty((8, 3))
        for l, corner in enumerate(_CORNERS):
            f = np.where(corner == 1, p, 1.0 - p)
            s = np.where(corner == 1, 1.0, -1.0)
            grads[l] = [s[0] * f[1] * f[2], f[0] * s[1] * f[2], f[0] * f[1] * s[2]]
        Ke += grads @ grads.T / 8.0
    return Ke


_QUAD_CONSISTENT = np.array([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]]) / 36.0


def face_nodes(n: int, face: str) -> np.ndarray:
    """Node indices of the boundary quads of one face, shape (n**2, 4), counter-rotating order."""
    n1 = n + 1
    axis = "xyz".index(face[0])
    fixed = 0 if face[1] == "-" else n
    u, v = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    u, v = u.ravel(), v.ravel()
    quads = []
    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
        coords = [None, None, None]
        others = [a for a in range(3) if a != axis]
        coords[axis] = np.full_like(u, fixed)
        coords[others[0]] = u + du
        coords[others[1]] = v + dv
        quads.append((coords[0] * n1 + coords[1]) * n1 + coords[2])
    return np.stack(quads, axis=1)


@dataclass
class FemSystem:
    mesh: Mesh
    M: np.ndarray  # lumped capacity per node, J/K
    K: sp.csr_matrix  # conduction stiffness, W/K
    H: sp.csr_matrix  # Robin surface matrix, W/K
    F: np.ndarray  # (nodes, 6): load per unit T_eq on each face, W/K
    face_h: tuple[float, ...] = field(default=(0.0,) * 6)

    def load(self, T_eq: Sequence[float]) -> np.ndarray:
        return self.F @ np.asarray(T_eq, dtype=float)

    @property
    def KH(self) -> sp.csr_matrix:
        return (self.K + self.H).tocsr()


def assemble(
    mesh: Mesh,
    materials: MaterialField,
    face_h: Sequence[float] | float,
    robin: str = "lumped",
) -> FemSystem:
    """Assemble capacity, stiffness and Robin terms.

    ``face_h`` is one film coefficient per face in ``FACES`` order (0 = adiabatic)
    or a single value for all faces. ``robin`` selects a row-sum lumped
    (default, keeps the system an M-matrix) or consistent surface matrix.
    """
    if np.isscalar(face_h):
        face_h = (float(face_h),) * 6
    face_h = tuple(float(v) for v in face_h)
    if len(face_h) != 6 or any(v < 0 for v in face_h):
        raise ValueError("need six non-negative face coefficients")
    N = mesh.n_nodes
    k, rc = materials.arrays(mesh)
    nodes = mesh.cell_nodes()
    Ke = unit_brick_stiffness() * mesh.h
    rows = np.repeat(nodes, 8, axis=1).ravel()
    cols = np.tile(nodes, (1, 8)).ravel()
    vals = (k[:, None, None] * Ke[None]).ravel()
    K = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    K = ((K + K.T) * 0.5).tocsr()

    M = np.zeros(N)
    np.add.at(M, nodes.ravel(), np.repeat(rc * mesh.cell_volume / 8.0, 8))

    area = mesh.h**2
    F = np.zeros((N, 6))
    h_rows, h_cols, h_vals = [], [], []
    for f, (face, hf) in enumerate(zip(FACES, face_h)):
        if hf == 0.0:
            continue
        q = face_nodes(mesh.n, face)
        np.add.at(F[:, f], q.ravel(), hf * area / 4.0)
        if robin == "lumped":
            h_rows.append(q.ravel())
            h_cols.append(q.ravel())
            h_vals.append(np.full(q.size, hf * area / 4.0))
        elif robin == "consistent":
            h_rows.append(np.repeat(q, 4, axis=1).ravel())
            h_cols.append(np.tile(q, (1, 4)).ravel())
            h_vals.append(np.tile((hf * area * _QUAD_CONSISTENT).ravel(), len(q)))
        else:
            raise ValueError("robin must be 'lumped' or 'consistent'")
    if h_rows:
        H = sp.coo_matrix(
            (np.concatenate(h_vals), (np.concatenate(h_rows), np.concatenate(h_cols))), shape=(N, N)
        ).tocsr()
    else:
        H = sp.csr_matrix((N, N))
    return FemSystem(mesh, M, K, H, F, face_h)


# -- linear solver ----------------------------------------------------------------------

def pcg(A, b, x0=None, tol: float = 1e-10, maxiter: int | None = None, diag=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops when ``||r|| <= tol ||b||``. Returns ``(x, residual_history)`` with
    relative residuals; raises :class:`CGError` if ``maxiter`` is hit.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    if diag is None:
        diag = A.diagonal()
    inv_d = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    history = [np.linalg.norm(r) / bnorm]
    if history[-1] <= tol:
        return x, history
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        history.append(np.linalg.norm(r) / bnorm)
        if history[-1] <= tol:
            return x, history
        z = inv_d * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise CGError("conjugate gradients did not converge", history)


# -- time stepping ------------------------------------------------------------------------

class Stepper:
    """Caches ``M/dt + theta (K + H)`` for repeated steps."""

    def __init__(self, system: FemSystem, dt: float, theta: float = 1.0, tol: float = 1e-10):
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        self.system = system
        self.dt = dt
        self.theta = theta
        self.tol = tol
        self.KH = system.KH
        self.A = (sp.diags(system.M / dt) + theta * self.KH).tocsr()
        self.diag = self.A.diagonal()
        self.last_residuals: list[float] = []

    def step(self, T: np.ndarray, T_eq0: Sequence[float], T_eq1: Sequence[float]) -> np.ndarray:
        s = self.system
        rhs = s.M / self.dt * T + self.theta * s.load(T_eq1)
        if self.theta < 1.0:
            rhs += (1.0 - self.theta) * (s.load(T_eq0) - self.KH @ T)
        T1, self.last_residuals = pcg(self.A, rhs, x0=T, tol=self.tol, diag=self.diag)
        return T1


def fem_step(system: FemSystem, T: np.ndarray, dt: float, T_eq0, T_eq1, theta: float = 1.0) -> np.ndarray:
    """Single theta-scheme step from ``tn`` to ``tn + dt``; face data at both ends."""
    return Stepper(system, dt, theta).step(T, T_eq0, T_eq1)


def solve_steady(system: FemSystem, T_eq: Sequence[float], x0=None, tol: float = 1e-12) -> np.ndarray:
    """Steady field ``(K + H) T = F T_eq``; needs at least one Robin face."""
    T, _ = pcg(system.KH, system.load(T_eq), x0=x0, tol=tol)
    return T


def solve_dirichlet(K, fixed: np.ndarray, values: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Steady ``K T = 0`` on free nodes with ``T[fixed] = values``."""
    fixed = np.asarray(fixed, dtype=bool)
    free = ~fixed
    K = sp.csr_matrix(K)
    Kff = K[free][:, free]
    rhs = -(K[free][:, fixed] @ values[fixed])
    T = values.astype(float).copy()
    T[free], _ = pcg(Kff, rhs, tol=tol)
    return T


# -- post-processing ----------------------------------------------------------------------

def cell_means(mesh: Mesh, T: np.ndarray) -> np.ndarray:
    return T[mesh.cell_nodes()].mean(axis=1)


def mean_core_temperature(mesh: Mesh, T: np.ndarray, material_id: int = CORE) -> float:
    """Volume-weighted mean of cell-averaged temperature over cells of ``material_id``."""
    cells = mesh.material.ravel() == material_id
    if not cells.any():
        raise MeshError("no core cells")
    return float(cell_means(mesh, T)[cells].mean())


def volume_mean(mesh: Mesh, T: np.ndarray) -> float:
    return float(cell_means(mesh, T).mean())


def probe_values(mesh: Mesh, T: np.ndarray, points) -> np.ndarray:
    x = np.arange(mesh.n + 1) * mesh.h
    interp = RegularGridInterpolator((x, x, x), T.reshape((mesh.n + 1,) * 3))
    return interp(np.atleast_2d(np.asarray(points, dtype=float)))


def write_vtk(path: str | Path, mesh: Mesh, T: np.ndarray, name: str = "temperature") -> None:
    """Legacy-VTK structured points file with nodal temperatures."""
    n1 = mesh.n + 1
    # VTK expects x fastest
    data = T.reshape((n1, n1, n1)).transpose(2, 1, 0).ravel()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n1} {n1} {n1}\nORIGIN 0 0 0\n")
        fh.write(f"SPACING {mesh.h!r} {mesh.h!r} {mesh.h!r}\n")
        fh.write(f"POINT_DATA {n1 ** 3}\nSCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for chunk in range(0, len(data), 8):
            fh.write(" ".join(f"{v:.6g}" for v in data[chunk:chunk + 8]) + "\n")


@dataclass
class FemSeries:
    hour: np.ndarray
    T_mean_core: np.ndarray
    probes: np.ndarray | None = None  # (N, probes)
    snapshots: dict = field(default_factory=dict)  # hour -> field
    final_field: np.ndarray | None = None


def simulate_fem(
    system: FemSystem,
    T_eq: np.ndarray,
    T0: float | np.ndarray,
    dt: float = 3600.0,
    substeps: int = 1,
    theta: float = 1.0,
    probes=None,
    snapshot_hours: Sequence[int] = (),
    tol: float = 1e-10,
) -> FemSeries:
    """Integrate hour by hour; ``T_eq[i]`` (6 faces) applies during hour ``i``.

    Face values are taken as hour-end samples; substeps interpolate linearly
    between the previous and current hour's values.
    """
    T_eq = np.asarray(T_eq, dtype=float)
    if T_eq.ndim != 2 or T_eq.shape[1] != 6:
        raise ValueError("T_eq must have shape (hours, 6)")
    mesh = system.mesh
    T = np.full(mesh.n_nodes, float(T0)) if np.isscalar(T0) else np.array(T0, dtype=float)
    stepper = Stepper(system, dt / substeps, theta, tol)
    N = len(T_eq)
    means = np.empty(N)
    probe_out = None if probes is None else np.empty((N, len(probes)))
    snapshots = {}
    wanted = set(int(h) for h in snapshot_hours)
    corners = mesh.cell_nodes()
    cells = mesh.material.ravel() == CORE
    if not cells.any():
        cells = np.ones_like(cells)
    corners = corners[cells]
    prev = T_eq[0]
    for i in range(N):
        cur = T_eq[i]
        for s in range(substeps):
            a0, a1 = s / substeps, (s + 1) / substeps
            T = stepper.step(T, prev + a0 * (cur - prev), prev + a1 * (cur - prev))
        prev = cur
        means[i] = T[corners].mean()
        if probe_out is not None:
            probe_out[i] = probe_values(mesh, T, probes)
        if i + 1 in wanted:
            snapshots[i + 1] = T.copy()
    return FemSeries(np.arange(1, N + 1), means, probe_out, snapshots, T)
