"""Global DOF numbering, sparse assembly, Dirichlet elimination and solvers."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import (StabilizationConfig, compute_cell_operators, local_load, local_mass,
                      local_neumann, local_stiffness)
from .face import compute_face_spaces, face_dofs_of_function
from .monomials import basis_size
from .quadrature import gauss_lobatto_internal_nodes

logger = logging.getLogger(__name__)

THREADS_ENV = "POLYVEM_THREADS"


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, msg, history=()):
        self.history = list(history)
        super().__init__(msg)


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class DofMap:
    """Global numbering: vertices, then edge nodes, face moments, cell moments."""

    mesh: object
    k: int
    dirichlet_tags: tuple = ()
    dirichlet: np.ndarray = None     # bool mask over global DOFs
    dirichlet_faces: np.ndarray = None

    def __post_init__(self):
        m, k = self.mesh, self.k
        self.n_face_moments = basis_size(k - 2, 2)
        self.n_cell_moments = basis_size(k - 2, 3)
        self.edge_offset = m.n_vertices
        self.face_offset = self.edge_offset + m.n_edges * (k - 1)
        self.cell_offset = self.face_offset + m.n_faces * self.n_face_moments
        self.size = self.cell_offset + m.n_cells * self.n_cell_moments

    @property
    def n_nodes(self):
        """Number of point-value DOFs (vertices and edge nodes)."""
        return self.face_offset

    def edge_dofs(self, edges):
        edges = np.asarray(edges)
        return (self.edge_offset + edges[:, None] * (self.k - 1)
                + np.arange(self.k - 1)[None, :]).ravel()

    def face_moment_dofs(self, faces):
        faces = np.asarray(faces)
        return (self.face_offset + faces[:, None] * self.n_face_moments
                + np.arange(self.n_face_moments)[None, :]).ravel()

    def cell_dofs(self, c):
        """Gather list matching the local cell DOF layout."""
        m = self.mesh
        return np.concatenate([
            m.cell_vertices(c),
            self.edge_dofs(m.cell_edges(c)),
            self.face_moment_dofs(m.cell_faces[c]),
            self.cell_offset + c * self.n_cell_moments + np.arange(self.n_cell_moments),
        ]).astype(np.int64)

    def face_dofs(self, f):
        """Gather list matching the face DOF layout."""
        m = self.mesh
        return np.concatenate([
            m.faces[f],
            self.edge_dofs(m.face_edges[f]),
            self.face_moment_dofs([f]),
        ]).astype(np.int64)

    def node_coords(self):
        """Coordinates of every point-value DOF, in global order."""
        m, k = self.mesh, self.k
        if k == 1:
            return m.vertices.copy()
        s = gauss_lobatto_internal_nodes(k)
        lo = m.vertices[m.edges[:, 0]]
        hi = m.vertices[m.edges[:, 1]]
        nodes = lo[:, None, :] + s[None, :, None] * (hi - lo)[:, None, :]
        return np.concatenate([m.vertices, nodes.reshape(-1, 3)])


def build_dof_map(mesh, k, dirichlet_tags=()):
    if k < 1:
        raise ConfigError("k must be >= 1")
    tags = tuple(dirichlet_tags)
    known = set(mesh.boundary_tags())
    unknown = [t for t in tags if t not in known]
    if unknown:
        raise ConfigError(f"unknown boundary tag(s) {unknown}; mesh has {sorted(known)}")
    dm = DofMap(mesh, k, tags)
    bf = np.array([f for f in mesh.boundary_faces if mesh.face_tags[f] in tags], dtype=np.int64)
    mask = np.zeros(dm.size, dtype=bool)
    for f in bf:
        mask[dm.face_dofs(f)] = True
    dm.dirichlet = mask
    dm.dirichlet_faces = bf
    return dm


def interpolate_dirichlet(mesh, k, r, dofmap, quad_degree=None):
    """Values of the prescribed DOFs on the Dirichlet faces (NaN elsewhere)."""
    vals = np.full(dofmap.size, np.nan)
    for f in dofmap.dirichlet_faces:
        vals[dofmap.face_dofs(f)] = face_dofs_of_function(mesh, f, k, r, quad_degree)
    return vals


def outward_normal(mesh, f):
    """Outward unit normal of a boundary face."""
    c = mesh.face_cells[f, 0]
    j = int(np.flatnonzero(mesh.cell_faces[c] == f)[0])
    return mesh.cell_signs[c][j] * mesh.frames[f].normal


@dataclass
class Discretization:
    """Per-mesh, per-degree operators that do not depend on the stabilization."""

    mesh: object
    k: int
    dofmap: DofMap
    face_spaces: dict
    cells: list            # CellOperators, without quadrature rules
    loads: list = None     # local load vectors for the forcing they were built with


def discretize(mesh, k, dofmap=None, forcing=None, quad_degree=None, threads=None):
    """Face spaces and cell operators for every cell, in cell order.

    Cell work is spread over ``threads`` workers (default from the
    ``POLYVEM_THREADS`` environment variable); results are kept in cell order
    so the assembled system does not depend on the thread count.
    """
    dofmap = dofmap or build_dof_map(mesh, k)
    fsp = compute_face_spaces(mesh, k, quad_degree)
    threads = threads or default_threads()

    def work(c):
        ops = compute_cell_operators(mesh, c, k, fsp, quad_degree, keep_rule=True)
        load = local_load(ops, forcing) if forcing is not None else None
        ops.rule = None
        return ops, load

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(work, range(mesh.n_cells)))
    else:
        res = [work(c) for c in range(mesh.n_cells)]
    cells = [r[0] for r in res]
    loads = [r[1] for r in res] if forcing is not None else None
    return Discretization(mesh, k, dofmap, fsp, cells, loads)


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix     # full assembled matrix (before elimination)
    rhs: np.ndarray           # full load + Neumann vector
    free: np.ndarray
    fixed: np.ndarray
    prescribed: np.ndarray    # values on ``fixed``
    A: sp.csr_matrix          # free-free block
    b: np.ndarray             # reduced right-hand side with Dirichlet lifting

    @property
    def size(self):
        return self.matrix.shape[0]


def _scatter(dofmap, blocks, n):
    rows, cols, vals = [], [], []
    for c, K in enumerate(blocks):
        g = dofmap.cell_dofs(c)
        rows.append(np.repeat(g, len(g)))
        cols.append(np.tile(g, len(g)))
        vals.append(K.ravel())
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble(disc, problem, stab=StabilizationConfig(), threads=None):
    """Global system for ``problem`` on a prepared discretization."""
    mesh, k, dm = disc.mesh, disc.k, disc.dofmap
    if set(problem.dirichlet_tags) != set(dm.dirichlet_tags):
        raise ConfigError("discretization was built for different Dirichlet tags")
    neumann = getattr(problem, "neumann_tags", None)
    if neumann is not None and set(neumann) & set(problem.dirichlet_tags):
        raise ConfigError("a boundary tag cannot be both Dirichlet and Neumann")

    def block(ops):
        K, _ = local_stiffness(ops, stab)
        if problem.reaction:
            K = K + local_mass(ops)
        return K

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            blocks = list(ex.map(block, disc.cells))
    else:
        blocks = [block(o) for o in disc.cells]
    A = _scatter(dm, blocks, dm.size)

    rhs = np.zeros(dm.size)
    loads = disc.loads
    if loads is None:
        loads = [local_load(o, problem.f, mesh) for o in disc.cells]
    for c, load in enumerate(loads):
        np.add.at(rhs, dm.cell_dofs(c), load)
    for f in mesh.boundary_faces:
        tag = mesh.face_tags[f]
        if tag in dm.dirichlet_tags:
            continue
        if neumann is not None and tag not in neumann:
            continue
        n = outward_normal(mesh, f)
        g = problem.neumann_data(n)
        np.add.at(rhs, dm.face_dofs(f), local_neumann(disc.face_spaces[f], g))

    fixed = np.flatnonzero(dm.dirichlet)
    free = np.flatnonzero(~dm.dirichlet)
    vals = interpolate_dirichlet(mesh, k, problem.r, dm)
    prescribed = vals[fixed]
    Aff = A[free][:, free].tocsr()
    b = rhs[free] - A[free][:, fixed] @ prescribed
    return LinearSystem(A, rhs, free, fixed, prescribed, Aff, b)


@dataclass
class Solution:
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    history: list = field(default_factory=list)
    method: str = "cg"


def pcg(A, b, tol=1e-12, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``(x, iterations, relative_residual, history)``; raises
    SolverError if the relative residual does not reach ``tol``.
    """
    n = len(b)
    max_iter = max_iter or max(10 * n, 100)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0, [0.0]
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    hist = [np.linalg.norm(r) / bnorm]
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        hist.append(res)
        if res <= tol:
            # confirm with the true residual to guard against drift
            res = np.linalg.norm(b - A @ x) / bnorm
            if res <= tol:
                return x, it, res, hist
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {hist[-1]:.3e})", hist)


def solve(system, tol=1e-12, max_iter=None, method="cg"):
    """Solve the reduced system and restore the prescribed values."""
    if method not in ("cg", "direct"):
        raise ConfigError(f"unknown solver {method!r}; use 'cg' or 'direct'")
    x = np.empty(system.size)
    x[system.fixed] = system.prescribed
    if len(system.free) == 0:
        return Solution(x, 0, 0.0, [], method)
    if method == "cg":
        y, it, res, hist = pcg(system.A, system.b, tol, max_iter)
    elif method == "direct":
        y = spla.spsolve(system.A.tocsc(), system.b)
        bn = np.linalg.norm(system.b)
        res = np.linalg.norm(system.b - system.A @ y) / bn if bn else 0.0
        it, hist = 1, [res]
    x[system.free] = y
    return Solution(x, it, res, hist, method)


def export_matrix(A, path):
    """Symmetric coordinate text export: ``nrows ncols nnz`` then 1-based ``i j v`` (i >= j)."""
    L = sp.tril(A).tocoo()
    order = np.lexsort((L.row, L.col))
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {L.nnz}\n")
        for i, j, v in zip(L.row[order], L.col[order], L.data[order]):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")
