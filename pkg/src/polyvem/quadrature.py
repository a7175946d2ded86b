"""Quadrature on edges, polygons and polyhedra.

Polygons are fanned into triangles from their centroid and polyhedra are
coned from the cell centroid over those triangles.  The simplex rules are
Stroud conical products (Gauss-Jacobi in the collapsed direction), which have
positive weights and reach any requested degree.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import GeometryError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))

    def __len__(self):
        return len(self.weights)


def _legendre(n, x):
    """P_n, P_n' and P_n'' at x (arrays), via the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x), np.zeros_like(x)
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        d2p = (2.0 * x * dp - n * (n + 1) * p1) / (1.0 - x * x)
    return p1, dp, d2p


@lru_cache(maxsize=None)
def _lobatto(k):
    # interior nodes are the roots of P_k'; Newton from Chebyshev-Lobatto guesses
    if k == 1:
        x = np.array([-1.0, 1.0])
    else:
        t = -np.cos(np.pi * np.arange(1, k) / k)
        for _ in range(100):
            _, dp, d2p = _legendre(k, t)
            step = dp / d2p
            t = t - step
            if np.max(np.abs(step)) < 1e-15:
                break
        t = 0.5 * (t - t[::-1])  # enforce exact symmetry
        x = np.concatenate([[-1.0], t, [1.0]])
    p, _, _ = _legendre(k, x)
    w = 2.0 / (k * (k + 1) * p**2)
    nodes = 0.5 * (x + 1.0)
    nodes[0], nodes[-1] = 0.0, 1.0
    nodes.setflags(write=False)
    w = 0.5 * w
    w.setflags(write=False)
    return nodes, w


def gauss_lobatto_internal_nodes(k):
    """Interior nodes of the (k+1)-point Gauss-Lobatto rule on [0, 1]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _lobatto(k)[0][1:-1].copy()


def gauss_lobatto_rule(k):
    """(k+1)-point Gauss-Lobatto nodes and weights on [0, 1], exact to degree 2k-1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n, w = _lobatto(k)
    return QuadratureRule(n.reshape(-1, 1), w)


@lru_cache(maxsize=None)
def _gauss_jacobi01(n, a):
    """n-point rule for int_0^1 (1-u)^a g(u) du."""
    x, w = roots_jacobi(n, a, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (a + 1)


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2."""
    n = max(1, (degree + 2) // 2)
    u, wu = _gauss_jacobi01(n, 1.0)
    v, wv = _gauss_jacobi01(n, 0.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    w = np.outer(wu, wv).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w)


@lru_cache(maxsize=None)
def tetrahedron_rule(degree):
    """Rule on the reference tetrahedron; weights sum to 1/6."""
    n = max(1, (degree + 2) // 2)
    u, wu = _gauss_jacobi01(n, 2.0)
    v, wv = _gauss_jacobi01(n, 1.0)
    t, wt = _gauss_jacobi01(n, 0.0)
    U, V, T = np.meshgrid(u, v, t, indexing="ij")
    pts = np.column_stack([U.ravel(), ((1 - U) * V).ravel(), ((1 - U) * (1 - V) * T).ravel()])
    w = (wu[:, None, None] * wv[None, :, None] * wt[None, None, :]).ravel()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w)


def polygon_quadrature(vertices, degree, center=None):
    """Rule on a planar polygon given by its 2D vertex cycle.

    The polygon is fanned from ``center`` (default: its area centroid).  The
    fan uses signed areas, so the rule stays exact for polynomials on any
    simple polygon.
    """
    P = np.asarray(vertices, float)
    Q = np.roll(P, -1, axis=0)
    if center is None:
        m = P.mean(axis=0)
        d1, d2 = P - m, Q - m
        a = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        center = m + (a[:, None] * (P - m + Q - m)).sum(axis=0) / (3.0 * a.sum())
    e1 = P - center
    e2 = Q - center
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    total = 0.5 * area2.sum()
    keep = np.abs(area2) >= 2e-14 * abs(total)
    if not keep.all():
        warnings.warn(f"skipping {np.count_nonzero(~keep)} degenerate fan triangle(s)",
                      RuntimeWarning, stacklevel=2)
    e1, e2, area2 = e1[keep], e2[keep], area2[keep]
    ref = triangle_rule(degree)
    pts = center + ref.points[:, 0, None, None] * e1 + ref.points[:, 1, None, None] * e2
    w = ref.weights[:, None] * area2[None, :]
    return QuadratureRule(pts.reshape(-1, 2), w.ravel())


def face_quadrature(mesh, f, degree):
    """Rule on mesh face ``f``: returns (local 2D rule, global 3D points)."""
    fr = mesh.frames[f]
    loc = fr.to_local(mesh.vertices[mesh.faces[f]])
    rule = polygon_quadrature(loc, degree, center=np.zeros(2))
    return rule, fr.to_global(rule.points)


def polyhedron_quadrature(mesh, c, degree):
    """Rule on cell ``c`` in global coordinates.

    Each outward face is fanned from its centroid and every triangle is coned
    to the cell centroid.  A negatively oriented tetrahedron means the cell is
    not star-shaped with respect to its centroid and raises GeometryError.
    """
    xp = mesh.centroids[c]
    vol = mesh.volumes[c]
    A, B, C, owner = [], [], [], []
    for j, f in enumerate(mesh.cell_faces[c]):
        P = mesh.vertices[mesh.oriented_face(c, j)]
        n = len(P)
        A.append(np.repeat(mesh.frames[f].origin[None], n, axis=0))
        B.append(P)
        C.append(np.roll(P, -1, axis=0))
        owner.append(np.full(n, f))
    a = np.concatenate(A) - xp
    b = np.concatenate(B) - xp
    cc = np.concatenate(C) - xp
    owner = np.concatenate(owner)
    det = np.einsum("ij,ij->i", a, np.cross(b, cc))
    if np.any(det < -1e-12 * 6.0 * vol):
        bad = owner[np.argmin(det)]
        raise GeometryError(f"cell {c}: inverted tetrahedron on face {bad}")
    keep = np.abs(det) > 1e-14 * 6.0 * vol
    a, b, cc, det = a[keep], b[keep], cc[keep], det[keep]
    ref = tetrahedron_rule(degree)
    r = ref.points
    pts = xp + r[:, 0, None, None] * a + r[:, 1, None, None] * b + r[:, 2, None, None] * cc
    w = ref.weights[:, None] * det[None, :]
    return QuadratureRule(pts.reshape(-1, 3), w.ravel())


def edge_points(a, b, t):
    """Points a + t (b - a) for parameters t."""
    t = np.asarray(t, float)
    return np.asarray(a, float) + t[:, None] * (np.asarray(b, float) - np.asarray(a, float))
