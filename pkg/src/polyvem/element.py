"""Local virtual element operators on a polyhedral cell.

Cell DOFs are ordered: vertex values (ascending global vertex id), edge
Gauss-Lobatto values (ascending global edge id, canonical node order), face
moments (in the cell's face order, ``(1/|f|) int_f v m_a``), and interior
moments ``(1/|P|) int_P v m_a`` with ``|a| <= k-2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .face import COND_WARN, ProjectorError, pi0_from_moments
from .monomials import (basis_size, equilibrated_solve, eval_basis, eval_basis_grad,
                        exponent_array, laplacian_matrix, restriction_matrix)
from .quadrature import gauss_lobatto_internal_nodes, polyhedron_quadrature

STABILIZATIONS = ("dofi", "recipe")


@dataclass(frozen=True)
class StabilizationConfig:
    """``kind`` is ``"dofi"`` (weight tau*h_P) or ``"recipe"`` (tau*max(h_P, d_i))."""

    kind: str = "dofi"
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in STABILIZATIONS:
            raise ValueError(f"unknown stabilization {self.kind!r}; use one of {STABILIZATIONS}")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau!r}")


@dataclass
class CellDofLayout:
    k: int
    vertices: np.ndarray   # global vertex ids, ascending
    edges: np.ndarray      # global edge ids, ascending
    faces: np.ndarray      # global face ids, cell order
    face_maps: list = field(default_factory=list)  # face DOF index -> cell DOF index

    @property
    def n_face_moments(self):
        return basis_size(self.k - 2, 2)

    @property
    def n_interior(self):
        return basis_size(self.k - 2, 3)

    @property
    def edge_offset(self):
        return len(self.vertices)

    @property
    def face_offset(self):
        return len(self.vertices) + len(self.edges) * (self.k - 1)

    @property
    def interior_offset(self):
        return self.face_offset + len(self.faces) * self.n_face_moments

    @property
    def size(self):
        return self.interior_offset + self.n_interior


def cell_dof_layout(mesh, c, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    verts = mesh.cell_vertices(c)
    edges = mesh.cell_edges(c)
    lay = CellDofLayout(k, verts, edges, mesh.cell_faces[c].copy())
    nmf = lay.n_face_moments
    for j, f in enumerate(lay.faces):
        cyc = mesh.faces[f]
        nv = len(cyc)
        m = np.empty(nv * k + nmf, dtype=np.int64)
        m[:nv] = np.searchsorted(verts, cyc)
        if k > 1:
            pe = np.searchsorted(edges, mesh.face_edges[f])
            m[nv:nv * k] = (lay.edge_offset + pe[:, None] * (k - 1)
                            + np.arange(k - 1)[None, :]).ravel()
        m[nv * k:] = lay.face_offset + j * nmf + np.arange(nmf)
        lay.face_maps.append(m)
    return lay


def edge_node_coords(mesh, edges, k):
    """Coordinates of the interior Gauss-Lobatto nodes, shape (len(edges)*(k-1), 3)."""
    if k == 1:
        return np.zeros((0, 3))
    s = gauss_lobatto_internal_nodes(k)
    lo = mesh.vertices[mesh.edges[edges, 0]]
    hi = mesh.vertices[mesh.edges[edges, 1]]
    return (lo[:, None, :] + s[None, :, None] * (hi - lo)[:, None, :]).reshape(-1, 3)


@dataclass
class CellOperators:
    cell: int
    k: int
    layout: CellDofLayout
    center: np.ndarray
    scale: float
    volume: float
    G: np.ndarray          # int_P grad m_a . grad m_b (no constraint row)
    H: np.ndarray          # int_P m_a m_b
    B: np.ndarray
    D: np.ndarray          # (N, dim P_k) DOFs of the monomials
    pi_nabla: np.ndarray   # (dim P_k, N)
    mom_ext: np.ndarray    # (dim P_k, N): int_P v m_a
    pi0: np.ndarray        # (dim P_k, N)
    rule: object = None

    @property
    def n_dofs(self):
        return self.layout.size


def _projection_rhs(mesh, c, k, lay, face_spaces, xp, hp, vol):
    nk = basis_size(k, 3)
    B = np.zeros((nk, lay.size))
    nk1 = basis_size(k - 1, 3)
    nkf1 = basis_size(k - 1, 2)
    E = exponent_array(k, 3)
    look = {tuple(a): i for i, a in enumerate(E[:nk1])}
    for j, f in enumerate(lay.faces):
        fs = face_spaces[f]
        fr = fs.frame
        nrm = mesh.cell_signs[c][j] * fr.normal
        # d m_a / dn restricted to the face, expanded exactly in face monomials
        R = restriction_matrix(k - 1, xp, hp, fr.origin, fr.axes, fs.scale)
        coef = np.zeros((nk, nkf1))
        for a in range(1, nk):
            for i in range(3):
                if E[a, i]:
                    b = E[a].copy()
                    b[i] -= 1
                    coef[a] += nrm[i] * E[a, i] / hp * R[look[tuple(b)]]
        B[:, lay.face_maps[j]] += coef @ fs.mom_ext[:nkf1]
    if k >= 2:
        B[:, lay.interior_offset:] -= vol * laplacian_matrix(k, 3, hp)
    return B


def _dof_matrix(mesh, c, k, lay, face_spaces, xp, hp, vol, H):
    nk = basis_size(k, 3)
    D = np.zeros((lay.size, nk))
    nv = len(lay.vertices)
    D[:nv] = eval_basis(mesh.vertices[lay.vertices], xp, hp, k)
    if k > 1:
        D[nv:lay.face_offset] = eval_basis(edge_node_coords(mesh, lay.edges, k), xp, hp, k)
        nmf = lay.n_face_moments
        for j, f in enumerate(lay.faces):
            fs = face_spaces[f]
            Vf = eval_basis(fs.rule.points, np.zeros(2), fs.scale, k - 2)
            V3 = eval_basis(fs.points, xp, hp, k)
            r0 = lay.face_offset + j * nmf
            D[r0:r0 + nmf] = (Vf * fs.rule.weights[:, None]).T @ V3 / fs.area
        D[lay.interior_offset:] = H[:lay.n_interior] / vol
    return D


def compute_pi_nabla_P(B, D, lay, k, c=None):
    """Solve the constrained energy projection for every DOF basis function.

    The first row of ``B`` is overwritten with the projection-fixing
    condition.  The system matrix is ``B D``, which equals the gradient Gram
    matrix (with the fixing row) in exact arithmetic.
    """
    nv = len(lay.vertices)
    B[0] = 0.0
    if k == 1:
        B[0, :nv] = 1.0 / nv
    else:
        B[0, lay.interior_offset] = 1.0
    try:
        return equilibrated_solve(B @ D, B)
    except np.linalg.LinAlgError:
        raise ProjectorError(f"singular projection matrix on cell {c}") from None


def compute_volume_moment_extension(H, pi_nabla, lay, vol, k):
    """Rows ``|a| <= k-2`` from interior DOFs, higher rows through the projection."""
    nk = basis_size(k, 3)
    nlow = lay.n_interior
    mom = np.zeros((nk, lay.size))
    if nlow:
        mom[:nlow, lay.interior_offset:] = vol * np.eye(nlow)
    mom[nlow:] = H[nlow:] @ pi_nabla
    return mom


def compute_pi0_P(H, mom_ext, pi_nabla, c=None):
    if np.linalg.cond(H) > COND_WARN:
        warnings.warn(f"cell {c}: monomial mass matrix is ill-conditioned", RuntimeWarning)
    return pi0_from_moments(H, mom_ext, pi_nabla)


def compute_cell_operators(mesh, c, k, face_spaces, quad_degree=None, keep_rule=False):
    """All projection matrices of cell ``c`` given its faces' spaces."""
    lay = cell_dof_layout(mesh, c, k)
    xp = mesh.centroids[c]
    hp = float(mesh.diameters[c])
    vol = float(mesh.volumes[c])
    rule = polyhedron_quadrature(mesh, c, quad_degree or 2 * k + 2)
    V = eval_basis(rule.points, xp, hp, k)
    Gr = eval_basis_grad(rule.points, xp, hp, k)
    W = rule.weights
    H = (V * W[:, None]).T @ V
    H = 0.5 * (H + H.T)
    G = np.einsum("q,qad,qbd->ab", W, Gr, Gr)
    G = 0.5 * (G + G.T)
    D = _dof_matrix(mesh, c, k, lay, face_spaces, xp, hp, vol, H)
    B = _projection_rhs(mesh, c, k, lay, face_spaces, xp, hp, vol)
    pn = compute_pi_nabla_P(B, D, lay, k, c)
    mom = compute_volume_moment_extension(H, pn, lay, vol, k)
    p0 = compute_pi0_P(H, mom, pn, c)
    return CellOperators(c, k, lay, xp, hp, vol, G, H, B, D, pn, mom, p0,
                         rule if keep_rule else None)


def consistency_matrix(ops):
    return ops.pi_nabla.T @ ops.G @ ops.pi_nabla


def stabilization_weights(ops, stab, consistency_diag=None):
    if consistency_diag is None:
        consistency_diag = np.diag(consistency_matrix(ops))
    if stab.kind == "dofi":
        return np.full(ops.n_dofs, stab.tau * ops.scale)
    return stab.tau * np.maximum(ops.scale, consistency_diag)


def local_stiffness(ops, stab=StabilizationConfig()):
    """Stabilized stiffness matrix and the consistency diagonal."""
    Kc = consistency_matrix(ops)
    d = np.diag(Kc).copy()
    S = np.eye(ops.n_dofs) - ops.D @ ops.pi_nabla
    sig = stabilization_weights(ops, stab, d)
    K = Kc + S.T @ (sig[:, None] * S)
    return 0.5 * (K + K.T), d


def local_mass(ops):
    S = np.eye(ops.n_dofs) - ops.D @ ops.pi0
    M = ops.pi0.T @ ops.H @ ops.pi0 + ops.volume * (S.T @ S)
    return 0.5 * (M + M.T)


def project_function(ops, fn, mesh=None, quad_degree=None):
    """Coefficients of the L2 projection of ``fn`` onto P_k(P)."""
    rule = ops.rule
    if rule is None:
        rule = polyhedron_quadrature(mesh, ops.cell, quad_degree or 2 * ops.k + 2)
    V = eval_basis(rule.points, ops.center, ops.scale, ops.k)
    rhs = (rule.weights * fn(rule.points)) @ V
    return equilibrated_solve(ops.H, rhs)


def local_load(ops, fn, mesh=None, quad_degree=None):
    """``int_P f_h phi_i`` with f_h the L2 projection of ``fn`` onto P_k(P)."""
    return ops.mom_ext.T @ project_function(ops, fn, mesh, quad_degree)


def local_neumann(face_space, g):
    """``int_f g_h phi_i`` over face DOFs; ``g((n,3) points) -> (n,)``."""
    fs = face_space
    V = eval_basis(fs.rule.points, np.zeros(2), fs.scale, fs.k)
    coef = equilibrated_solve(fs.H, (fs.rule.weights * g(fs.points)) @ V)
    return fs.mom_ext.T @ coef


def cell_dofs_of_function(mesh, c, k, fn, face_spaces=None, quad_degree=None):
    """Cell DOF vector of a pointwise function (exact on polynomials)."""
    from .face import face_dofs_of_function

    lay = cell_dof_layout(mesh, c, k)
    v = np.empty(lay.size)
    nv = len(lay.vertices)
    v[:nv] = fn(mesh.vertices[lay.vertices])
    if k > 1:
        v[nv:lay.face_offset] = fn(edge_node_coords(mesh, lay.edges, k))
        for j, f in enumerate(lay.faces):
            fd = face_dofs_of_function(mesh, f, k, fn, quad_degree)
            v[lay.face_maps[j][-lay.n_face_moments:]] = fd[-lay.n_face_moments:]
        rule = polyhedron_quadrature(mesh, c, quad_degree or 2 * k + 2)
        Vm = eval_basis(rule.points, mesh.centroids[c], mesh.diameters[c], k - 2)
        v[lay.interior_offset:] = (rule.weights * fn(rule.points)) @ Vm / mesh.volumes[c]
    return v
