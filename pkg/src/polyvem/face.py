"""The virtual element space on a single planar face.

Everything is expressed as dense matrices acting on the face DOF vector,
ordered as: vertex values (face cycle order), Gauss-Lobatto values on each
edge (cycle order, nodes ascending along the canonical low-to-high vertex
direction), then scaled moments ``(1/|E|) int_E v m_a`` for ``|a| <= k-2``.
Face monomials live in the face frame, centered at the face centroid and
scaled by the face diameter.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import GeometryError
from .monomials import (basis_size, equilibrated_solve, eval_basis, eval_basis_grad,
                        laplacian_matrix)
from .quadrature import face_quadrature, gauss_lobatto_rule

COND_WARN = 1e12


class ProjectorError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FaceDofLayout:
    k: int
    n_vertices: int

    @property
    def n_edge_nodes(self):
        return self.k - 1

    @property
    def n_moments(self):
        return basis_size(self.k - 2, 2)

    @property
    def edge_offset(self):
        return self.n_vertices

    @property
    def moment_offset(self):
        return self.n_vertices * self.k

    @property
    def size(self):
        return self.n_vertices * self.k + self.n_moments

    def descriptors(self):
        out = [("vertex", i) for i in range(self.n_vertices)]
        out += [("edge", e, m) for e in range(self.n_vertices) for m in range(self.k - 1)]
        out += [("moment", g) for g in range(self.n_moments)]
        return out


def face_dof_layout(mesh, f, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    return FaceDofLayout(k, len(mesh.faces[f]))


@dataclass
class FaceSpace:
    """Projection matrices of one face (all map DOF vectors to coefficients)."""

    face: int
    k: int
    layout: FaceDofLayout
    frame: object
    scale: float
    area: float
    G: np.ndarray          # int grad m_a . grad m_b
    B: np.ndarray          # right-hand side of the energy projection
    pi_nabla: np.ndarray   # (dim P_k, N_E)
    D: np.ndarray          # (N_E, dim P_k): DOFs of each monomial
    H: np.ndarray          # monomial mass matrix
    mom_ext: np.ndarray    # (dim P_k, N_E): int_E v m_b
    pi0: np.ndarray        # (dim P_k, N_E)
    rule: object = None    # local quadrature rule used for H and G
    points: np.ndarray = None  # the same points in global coordinates

    @property
    def center(self):
        return np.zeros(2)


def _edge_nodes(loc, cyc, k):
    """Per cycle edge: GL node coordinates and their face DOF indices."""
    rule = gauss_lobatto_rule(k)
    t = rule.points[:, 0]
    nv = len(cyc)
    out = []
    for i in range(nv):
        j = (i + 1) % nv
        a, b = loc[i], loc[j]
        X = a + t[:, None] * (b - a)
        dofs = np.empty(k + 1, dtype=np.int64)
        dofs[0], dofs[-1] = i, j
        if k > 1:
            q = np.arange(1, k)
            m = q - 1 if cyc[i] < cyc[j] else k - 1 - q
            dofs[1:-1] = nv + i * (k - 1) + m
        out.append((X, dofs, rule.weights, np.linalg.norm(b - a), b - a))
    return out


def local_vertex_coords(mesh, f):
    return mesh.frames[f].to_local(mesh.vertices[mesh.faces[f]])


def face_dofs_of_function(mesh, f, k, fn, quad_degree=None):
    """DOF vector of a function ``fn((n,3) global points) -> (n,)`` on face f."""
    fr = mesh.frames[f]
    cyc = mesh.faces[f]
    loc = fr.to_local(mesh.vertices[cyc])
    lay = face_dof_layout(mesh, f, k)
    v = np.empty(lay.size)
    v[:lay.n_vertices] = fn(mesh.vertices[cyc])
    for X, dofs, *_ in _edge_nodes(loc, cyc, k):
        if k > 1:
            v[dofs[1:-1]] = fn(fr.to_global(X[1:-1]))
    if lay.n_moments:
        rule, Xg = face_quadrature(mesh, f, quad_degree or 2 * k + 2)
        Vm = eval_basis(rule.points, np.zeros(2), fr.diameter, k - 2)
        v[lay.moment_offset:] = (rule.weights * fn(Xg)) @ Vm / fr.area
    return v


def compute_face_space(mesh, f, k, quad_degree=None):
    """Energy projector, moment extension and L2 projector on face ``f``."""
    fr = mesh.frames[f]
    hf, area = fr.diameter, fr.area
    cyc = mesh.faces[f]
    loc = fr.to_local(mesh.vertices[cyc])
    lay = face_dof_layout(mesh, f, k)
    N, nk, nlow = lay.size, basis_size(k, 2), lay.n_moments
    zero = np.zeros(2)

    rule, Xg = face_quadrature(mesh, f, quad_degree or 2 * k + 2)
    V = eval_basis(rule.points, zero, hf, k)
    Gr = eval_basis_grad(rule.points, zero, hf, k)
    W = rule.weights
    H = (V * W[:, None]).T @ V
    H = 0.5 * (H + H.T)
    G = np.einsum("q,qad,qbd->ab", W, Gr, Gr)
    G = 0.5 * (G + G.T)

    B = np.zeros((nk, N))
    D = np.zeros((N, nk))
    D[:lay.n_vertices] = eval_basis(loc, zero, hf, k)
    for X, dofs, w, L, tvec in _edge_nodes(loc, cyc, k):
        nrm = np.array([tvec[1], -tvec[0]]) / L
        dn = eval_basis_grad(X, zero, hf, k) @ nrm
        np.add.at(B.T, dofs, (w * L)[:, None] * dn)
        if k > 1:
            D[dofs[1:-1]] = eval_basis(X[1:-1], zero, hf, k)
    if nlow:
        B[:, lay.moment_offset:] -= area * laplacian_matrix(k, 2, hf)
        D[lay.moment_offset:] = H[:nlow] / area

    if k == 1:
        B[0] = 0.0
        B[0, :lay.n_vertices] = 1.0 / lay.n_vertices
    else:
        B[0] = 0.0
        B[0, lay.moment_offset] = 1.0
    # B D equals G (first row: the fixing condition) in exact arithmetic;
    # solving with it keeps polynomial reproduction at rounding level
    Gf = B @ D
    try:
        pi_nabla = equilibrated_solve(Gf, B)
    except np.linalg.LinAlgError:
        raise ProjectorError(f"singular projection matrix on face {f}") from None

    mom = np.zeros((nk, N))
    if nlow:
        mom[:nlow, lay.moment_offset:] = area * np.eye(nlow)
    mom[nlow:] = H[nlow:] @ pi_nabla
    if np.linalg.cond(H) > COND_WARN:
        warnings.warn(f"face {f}: monomial mass matrix is ill-conditioned", RuntimeWarning)
    pi0 = pi0_from_moments(H, mom, pi_nabla)
    return FaceSpace(f, k, lay, fr, hf, area, G, B, pi_nabla, D, H, mom, pi0, rule, Xg)


def pi0_from_moments(H, mom, pi_nabla):
    """``H^-1 MomExt``, written as ``Pi_nabla + H^-1 (MomExt - H Pi_nabla)``.

    Same operator, but the correction only involves the low moment rows and
    is small on near-polynomial inputs, so reproduction keeps the accuracy
    of the energy projector instead of paying cond(H) again.
    """
    return pi_nabla + equilibrated_solve(H, mom - H @ pi_nabla)


def compute_face_pi_nabla(mesh, f, k):
    return compute_face_space(mesh, f, k).pi_nabla


def compute_face_moment_extension(mesh, f, k):
    return compute_face_space(mesh, f, k).mom_ext


def compute_face_pi0(mesh, f, k):
    return compute_face_space(mesh, f, k).pi0


def compute_face_spaces(mesh, k, quad_degree=None, faces=None):
    faces = range(mesh.n_faces) if faces is None else faces
    out = {}
    for f in faces:
        try:
            out[f] = compute_face_space(mesh, f, k, quad_degree)
        except GeometryError as exc:
            raise GeometryError(f"face {f}: {exc}") from None
    return out
