"""Scaled monomial bases on cells (3D) and faces (2D).

All matrices elsewhere in the package index polynomial coefficients in the
graded-lexicographic order produced by :func:`multi_indices`: degree-major,
and inside one degree the exponent of ``x`` decreases first, then ``y``.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def multi_indices(k: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of total degree <= k in dimension d, graded-lex."""
    if k < 0:
        return ()
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    out = []
    for s in range(k + 1):
        out.extend(_homogeneous(s, d))
    return tuple(out)


def _homogeneous(s: int, d: int) -> list[tuple[int, ...]]:
    if d == 1:
        return [(s,)]
    out = []
    for a in range(s, -1, -1):
        for rest in _homogeneous(s - a, d - 1):
            out.append((a,) + rest)
    return out


def basis_size(k: int, d: int) -> int:
    """dim P_k in d variables; zero for negative k."""
    return comb(k + d, d) if k >= 0 else 0


def basis_layout(k: int, d: int):
    """Multi-index list plus the index range of each homogeneous slice.

    Returns ``(indices, slices)`` where ``slices[s]`` is a ``range`` covering
    the monomials of degree exactly ``s``.
    """
    idx = multi_indices(k, d)
    slices = [range(basis_size(s - 1, d), basis_size(s, d)) for s in range(k + 1)]
    return list(idx), slices


@lru_cache(maxsize=None)
def exponent_array(k: int, d: int) -> np.ndarray:
    arr = np.array(multi_indices(k, d), dtype=int).reshape(-1, d)
    arr.setflags(write=False)
    return arr


def monomial_eval(alpha, point, center, scale: float) -> float:
    """Value of the scaled monomial ``prod(((x - c) / scale) ** alpha)``."""
    xi = (np.asarray(point, float) - np.asarray(center, float)) / scale
    return float(np.prod(xi ** np.asarray(alpha)))


def monomial_grad(alpha, point, center, scale: float) -> np.ndarray:
    alpha = np.asarray(alpha)
    xi = (np.asarray(point, float) - np.asarray(center, float)) / scale
    g = np.zeros(len(alpha))
    for i, a in enumerate(alpha):
        if a == 0:
            continue
        e = alpha.copy()
        e[i] -= 1
        g[i] = a / scale * np.prod(xi ** e)
    return g


def _powers(xi: np.ndarray, k: int) -> np.ndarray:
    # pw[j, n, i] = xi[n, i] ** j
    pw = np.ones((k + 1,) + xi.shape)
    for j in range(1, k + 1):
        pw[j] = pw[j - 1] * xi
    return pw


def eval_basis(points, center, scale: float, k: int) -> np.ndarray:
    """Values of all scaled monomials of degree <= k, shape (npts, nbasis)."""
    pts = np.atleast_2d(np.asarray(points, float))
    d = pts.shape[1]
    xi = (pts - center) / scale
    pw = _powers(xi, k)
    E = exponent_array(k, d)
    V = np.ones((pts.shape[0], len(E)))
    for i in range(d):
        V *= pw[E[:, i], :, i].T
    return V


def eval_basis_grad(points, center, scale: float, k: int) -> np.ndarray:
    """Gradients of all scaled monomials, shape (npts, nbasis, d)."""
    pts = np.atleast_2d(np.asarray(points, float))
    d = pts.shape[1]
    xi = (pts - center) / scale
    pw = _powers(xi, k)
    E = exponent_array(k, d)
    G = np.empty((pts.shape[0], len(E), d))
    for j in range(d):
        g = np.ones((pts.shape[0], len(E)))
        for i in range(d):
            if i == j:
                e = np.maximum(E[:, i] - 1, 0)
                g *= pw[e, :, i].T * (E[:, i] / scale)
            else:
                g *= pw[E[:, i], :, i].T
        G[:, :, j] = g
    return G


@lru_cache(maxsize=None)
def _index_lookup(k: int, d: int) -> dict:
    return {a: i for i, a in enumerate(multi_indices(k, d))}


def laplacian_matrix(k: int, d: int, scale: float) -> np.ndarray:
    """Coefficients of the Laplacian of each monomial in the degree k-2 basis.

    Row ``alpha`` (over P_k) holds the expansion of ``Laplacian(m_alpha)`` in
    the scaled monomials of degree <= k-2, so the result has shape
    ``(dim P_k, dim P_{k-2})``.
    """
    lo = _index_lookup(k - 2, d) if k >= 2 else {}
    L = np.zeros((basis_size(k, d), basis_size(k - 2, d)))
    for r, a in enumerate(multi_indices(k, d)):
        for i in range(d):
            if a[i] >= 2:
                b = list(a)
                b[i] -= 2
                L[r, lo[tuple(b)]] += a[i] * (a[i] - 1) / scale**2
    return L


def equilibrated_solve(A, B):
    """Solve ``A X = B`` after symmetric diagonal scaling of ``A``.

    Scaled monomial Gram matrices have diagonals spanning several orders of
    magnitude at high degree; equilibrating first keeps the solve accurate.
    """
    d = np.sqrt(np.abs(np.diag(A)))
    d[d == 0.0] = 1.0
    s = 1.0 / d
    Y = np.linalg.solve(A * s[:, None] * s[None, :], B * s.reshape((-1,) + (1,) * (B.ndim - 1)))
    return Y * s.reshape((-1,) + (1,) * (B.ndim - 1))


def restriction_matrix(k: int, center, scale: float, origin, axes, face_scale: float) -> np.ndarray:
    """Exact expansion of 3D scaled monomials restricted to a plane.

    The plane is ``x = origin + xi * axes[0] + eta * axes[1]``; face monomials
    are ``(xi / face_scale)^a (eta / face_scale)^b``.  Row ``alpha`` of the
    result (over P_k in 3D) holds the face-monomial coefficients (over P_k in
    2D) of ``m_alpha`` on that plane.
    """
    E3 = multi_indices(k, 3)
    look2 = _index_lookup(k, 2)
    E2 = multi_indices(k, 2)
    n2 = len(E2)
    # each scaled cell coordinate as c0 + c1 xi_hat + c2 eta_hat
    aff = np.empty((3, 3))
    aff[:, 0] = (np.asarray(origin, float) - np.asarray(center, float)) / scale
    aff[:, 1] = np.asarray(axes[0], float) * (face_scale / scale)
    aff[:, 2] = np.asarray(axes[1], float) * (face_scale / scale)
    # multiplying by xi_hat / eta_hat shifts the exponent: precompute targets
    up = np.full((n2, 2), -1, dtype=int)
    for j, (a, b) in enumerate(E2):
        if a + b < k:
            up[j, 0] = look2[(a + 1, b)]
            up[j, 1] = look2[(a, b + 1)]
    look3 = _index_lookup(k, 3)
    R = np.zeros((len(E3), n2))
    R[0, 0] = 1.0
    for r, al in enumerate(E3[1:], start=1):
        i = next(t for t in range(3) if al[t])
        parent = list(al)
        parent[i] -= 1
        p = R[look3[tuple(parent)]]
        row = aff[i, 0] * p
        nz = np.flatnonzero(p)
        np.add.at(row, up[nz, 0], aff[i, 1] * p[nz])
        np.add.at(row, up[nz, 1], aff[i, 2] * p[nz])
        R[r] = row
    return R
