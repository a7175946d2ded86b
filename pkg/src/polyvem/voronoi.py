"""Prismatic Voronoi meshes: a clipped 2D Voronoi diagram of the box
cross-section, optionally Lloyd-relaxed, extruded into layers of prisms."""
from __future__ import annotations

import logging

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .mesh import MeshError, box_tagger, mesh_from_cell_polygons, validate_mesh

logger = logging.getLogger(__name__)

MAX_RETRIES = 20


class DegenerateVoronoiError(MeshError):
    pass


def _clip(poly, p, nrm):
    """Keep the part of a convex polygon with (x - p) . nrm <= 0."""
    s = (poly - p) @ nrm
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if s[i] <= 0:
            out.append(poly[i])
        if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out).reshape(-1, 2)


def _neighbors(seeds):
    n = len(seeds)
    if n <= 8:
        return [np.array([j for j in range(n) if j != i]) for i in range(n)]
    try:
        ptr, idx = Delaunay(seeds).vertex_neighbor_vertices
    except QhullError:
        return [np.array([j for j in range(n) if j != i]) for i in range(n)]
    return [idx[ptr[i]:ptr[i + 1]] for i in range(n)]


def clipped_voronoi(seeds, lo, hi):
    """Voronoi cells of ``seeds`` clipped to the rectangle [lo, hi], CCW."""
    seeds = np.asarray(seeds, float)
    rect = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]], float)
    cells = []
    for i, nb in enumerate(_neighbors(seeds)):
        poly = rect
        for j in nb:
            d = seeds[j] - seeds[i]
            poly = _clip(poly, 0.5 * (seeds[i] + seeds[j]), d)
            if len(poly) == 0:
                break
        cells.append(poly)
    return cells


def polygon_area_centroid(P):
    Q = np.roll(P, -1, axis=0)
    cr = P[:, 0] * Q[:, 1] - Q[:, 0] * P[:, 1]
    a = 0.5 * cr.sum()
    c = ((P + Q) * cr[:, None]).sum(axis=0) / (6.0 * a)
    return a, c


def lloyd(seeds, lo, hi, iters):
    """``iters`` Lloyd steps: move each seed to its clipped cell's centroid."""
    seeds = np.asarray(seeds, float).copy()
    for _ in range(iters):
        cells = clipped_voronoi(seeds, lo, hi)
        seeds = np.array([polygon_area_centroid(P)[1] for P in cells])
    return seeds


def _merge_vertices(cells, lo, hi, tol):
    """Weld polygon vertices closer than ``tol``; snap to the box sides."""
    pts = np.concatenate(cells)
    for ax in range(2):
        for val in (lo[ax], hi[ax]):
            pts[np.abs(pts[:, ax] - val) <= tol, ax] = val
    parent = np.arange(len(pts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(pts).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(pts))])
    uniq, ids = np.unique(roots, return_inverse=True)
    coords = pts[uniq]
    polys, start = [], 0
    for P in cells:
        cyc = ids[start:start + len(P)]
        start += len(P)
        keep = cyc != np.roll(cyc, -1)
        polys.append([int(v) for v in cyc[keep]])
    return coords, polys


def _check_planar_mesh(coords, polys, lo, hi, area_tol):
    """Every interior 2D edge must be shared by exactly two polygons."""
    count = {}
    for k, cyc in enumerate(polys):
        if len(cyc) < 3 or len(set(cyc)) != len(cyc):
            return f"polygon {k} collapsed"
        a, _ = polygon_area_centroid(coords[cyc])
        if a < area_tol:
            return f"polygon {k} has area {a:.3e}"
        for a_, b_ in zip(cyc, cyc[1:] + cyc[:1]):
            key = (min(a_, b_), max(a_, b_))
            count[key] = count.get(key, 0) + 1
    for (a_, b_), n in count.items():
        on_side = any(coords[a_, ax] == v and coords[b_, ax] == v
                      for ax in range(2) for v in (lo[ax], hi[ax]))
        if n != (1 if on_side else 2):
            return f"edge ({a_}, {b_}) used {n} times"
    return None


def build_prismatic_voronoi_mesh(n_seeds, n_layers, rng_seed=0, lloyd_iters=0,
                                 domain=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))):
    """Extruded (clipped, optionally Lloyd-relaxed) Voronoi mesh of a box.

    Seeds are drawn uniformly in the cross-section with ``numpy``'s default
    generator seeded by ``rng_seed``.  Degenerate diagrams are redrawn; the
    number of redraws is stored in ``mesh.info["retries"]``.
    """
    if n_seeds < 1 or n_layers < 1:
        raise ValueError("n_seeds and n_layers must be >= 1")
    lo, hi = (np.asarray(d, float) for d in domain)
    rng = np.random.default_rng(rng_seed)
    area = (hi[0] - lo[0]) * (hi[1] - lo[1])
    h2 = np.sqrt(area / n_seeds)
    for retry in range(MAX_RETRIES):
        seeds = lo[:2] + rng.random((n_seeds, 2)) * (hi[:2] - lo[:2])
        seeds = lloyd(seeds, lo, hi, lloyd_iters)
        cells = clipped_voronoi(seeds, lo, hi)
        if any(len(P) < 3 for P in cells):
            logger.warning("empty Voronoi cell, redrawing seeds (retry %d)", retry + 1)
            continue
        coords, polys = _merge_vertices(cells, lo, hi, 1e-8 * h2)
        problem = _check_planar_mesh(coords, polys, lo, hi, 1e-8 * area / n_seeds)
        if problem is None:
            break
        logger.warning("degenerate Voronoi diagram (%s), redrawing seeds (retry %d)",
                       problem, retry + 1)
    else:
        raise DegenerateVoronoiError(f"no valid diagram after {MAX_RETRIES} attempts")

    nv2 = len(coords)
    z = np.linspace(lo[2], hi[2], n_layers + 1)
    verts = np.column_stack([np.tile(coords, (n_layers + 1, 1)), np.repeat(z, nv2)])
    cells3 = []
    for layer in range(n_layers):
        b, t = layer * nv2, (layer + 1) * nv2
        for cyc in polys:
            faces = [[b + v for v in cyc[::-1]], [t + v for v in cyc]]
            for i, a_ in enumerate(cyc):
                c_ = cyc[(i + 1) % len(cyc)]
                faces.append([b + a_, b + c_, t + c_, t + a_])
            cells3.append(faces)
    info = {"family": "prismatic-voronoi", "n_seeds": n_seeds, "n_layers": n_layers,
            "rng_seed": rng_seed, "lloyd_iters": lloyd_iters, "retries": retry,
            "seeds": seeds}
    mesh = mesh_from_cell_polygons(verts, cells3, box_tagger(lo, hi), info=info)
    rep = validate_mesh(mesh)
    if not rep.ok:
        raise DegenerateVoronoiError("generated mesh failed validation:\n" + rep.summary())
    return mesh
