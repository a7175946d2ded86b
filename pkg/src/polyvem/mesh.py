"""Conforming polyhedral meshes: storage, geometry, generation, I/O, checks.

A mesh stores vertices, polygonal faces (vertex cycles) and cells (lists of
face ids, each with an orientation sign).  A sign of ``+1`` means the face
cycle, read with the right-hand rule, points out of the cell.  Edges are
derived from the face cycles and identified by their sorted vertex pair,
which also fixes the canonical edge direction (low vertex id to high).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

logger = logging.getLogger(__name__)

PLANARITY_TOL = 1e-9
BOX_TAGS = ("x0", "x1", "y0", "y1", "z0", "z1")


class MeshError(ValueError):
    pass


class TopologyError(MeshError):
    pass


class GeometryError(MeshError):
    pass


class MeshParseError(MeshError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class MeshValidationError(MeshError):
    def __init__(self, report):
        self.report = report
        super().__init__(report.summary())


@dataclass(frozen=True)
class FaceFrame:
    """Local orthonormal frame of a planar face.

    ``origin`` is the face centroid; ``axes`` holds the two in-plane unit
    vectors as rows and ``normal = axes[0] x axes[1]``.
    """

    origin: np.ndarray
    axes: np.ndarray
    normal: np.ndarray
    diameter: float
    area: float

    def to_local(self, x):
        return (np.asarray(x, float) - self.origin) @ self.axes.T

    def to_global(self, xi):
        return self.origin + np.asarray(xi, float) @ self.axes


def _polygon_geometry(P):
    """Area-weighted normal, area and centroid of a (nearly) planar cycle."""
    # Newell normal: length is twice the area for planar polygons
    Q = np.roll(P, -1, axis=0)
    nv = np.array([
        np.sum((P[:, 1] - Q[:, 1]) * (P[:, 2] + Q[:, 2])),
        np.sum((P[:, 2] - Q[:, 2]) * (P[:, 0] + Q[:, 0])),
        np.sum((P[:, 0] - Q[:, 0]) * (P[:, 1] + Q[:, 1])),
    ])
    norm = np.linalg.norm(nv)
    if norm == 0.0:
        raise GeometryError("face has zero area")
    n = nv / norm
    m = P.mean(axis=0)
    cr = np.cross(P - m, Q - m) @ n * 0.5
    area = cr.sum()
    cen = m + (cr[:, None] * ((P - m) + (Q - m))).sum(axis=0) / (3.0 * area)
    return n, area, cen


def _face_frame(P):
    n, area, cen = _polygon_geometry(P)
    a1 = P[1] - P[0]
    a1 = a1 - (a1 @ n) * n
    a1 /= np.linalg.norm(a1)
    a2 = np.cross(n, a1)
    diam = float(pdist(P).max())
    return FaceFrame(cen, np.array([a1, a2]), n, diam, float(area))


class Mesh:
    """Polyhedral mesh with derived topology and cached geometry.

    Parameters
    ----------
    vertices : (nv, 3) array
    faces : list of vertex-id sequences (cycles)
    cell_faces : list of face-id sequences
    cell_signs : list of +1/-1 sequences matching ``cell_faces``
    face_tags : list of str or None, one per face
    """

    def __init__(self, vertices, faces, cell_faces, cell_signs, face_tags=None, info=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.vertices.setflags(write=False)
        self.faces = [np.asarray(f, dtype=np.int64) for f in faces]
        self.cell_faces = [np.asarray(c, dtype=np.int64) for c in cell_faces]
        self.cell_signs = [np.asarray(s, dtype=np.int64) for s in cell_signs]
        if face_tags is None:
            face_tags = [None] * len(self.faces)
        self.face_tags = list(face_tags)
        self.info = dict(info or {})
        if len(self.cell_faces) != len(self.cell_signs):
            raise TopologyError("cell_faces and cell_signs differ in length")
        if len(self.face_tags) != len(self.faces):
            raise TopologyError("face_tags must have one entry per face")
        if not np.all(np.isfinite(self.vertices)):
            raise GeometryError("vertex coordinates must be finite")

    # -- sizes -----------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_cells(self):
        return len(self.cell_faces)

    @property
    def n_edges(self):
        return len(self.edges)

    # -- topology --------------------------------------------------------
    @cached_property
    def _edge_data(self):
        index = {}
        face_edges = []
        for f in self.faces:
            ids = []
            for a, b in zip(f, np.roll(f, -1)):
                key = (int(a), int(b)) if a < b else (int(b), int(a))
                e = index.get(key)
                if e is None:
                    e = index[key] = len(index)
                ids.append(e)
            face_edges.append(np.array(ids, dtype=np.int64))
        edges = np.array(list(index.keys()), dtype=np.int64).reshape(-1, 2)
        return edges, face_edges

    @property
    def edges(self):
        """(ne, 2) sorted vertex pairs; row order is first appearance."""
        return self._edge_data[0]

    @property
    def face_edges(self):
        """Per face, edge ids in cycle order (edge i joins cycle vertices i, i+1)."""
        return self._edge_data[1]

    @cached_property
    def face_cells(self):
        """(nf, 2) incident cells; column 0 is the +1 (outward) cell if any, -1 if absent."""
        fc = np.full((self.n_faces, 2), -1, dtype=np.int64)
        refs = [[] for _ in range(self.n_faces)]
        for c, (fs, ss) in enumerate(zip(self.cell_faces, self.cell_signs)):
            for f, s in zip(fs, ss):
                refs[f].append((c, s))
        self._face_refs = refs
        for f, r in enumerate(refs):
            r = sorted(r, key=lambda cs: (-cs[1], cs[0]))[:2]
            for j, (c, _) in enumerate(r):
                fc[f, j] = c
        return fc

    @cached_property
    def boundary_faces(self):
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    def boundary_tags(self):
        return sorted({self.face_tags[f] for f in self.boundary_faces if self.face_tags[f]})

    def cell_vertices(self, c):
        return np.unique(np.concatenate([self.faces[f] for f in self.cell_faces[c]]))

    def cell_edges(self, c):
        return np.unique(np.concatenate([self.face_edges[f] for f in self.cell_faces[c]]))

    def oriented_face(self, c, j):
        """Vertex cycle of the j-th face of cell c, oriented outward."""
        f = self.cell_faces[c][j]
        return self.faces[f] if self.cell_signs[c][j] > 0 else self.faces[f][::-1]

    # -- geometry --------------------------------------------------------
    @cached_property
    def frames(self):
        out = []
        for i, f in enumerate(self.faces):
            if len(f) < 3:
                raise TopologyError(f"face {i} has fewer than 3 vertices")
            try:
                out.append(_face_frame(self.vertices[f]))
            except GeometryError as exc:
                raise GeometryError(f"face {i}: {exc}") from None
        return out

    @cached_property
    def _cell_geometry(self):
        cen = np.empty((self.n_cells, 3))
        diam = np.empty(self.n_cells)
        vol = np.empty(self.n_cells)
        for c in range(self.n_cells):
            cen[c], diam[c], vol[c] = compute_cell_geometry(self, c)
        for a in (cen, diam, vol):
            a.setflags(write=False)
        return cen, diam, vol

    @property
    def centroids(self):
        return self._cell_geometry[0]

    @property
    def diameters(self):
        return self._cell_geometry[1]

    @property
    def volumes(self):
        return self._cell_geometry[2]

    @property
    def volume(self):
        return float(np.sum(self.volumes))

    def transformed(self, fn):
        """Same topology with vertices mapped by ``fn((n,3) array)``."""
        return Mesh(fn(self.vertices.copy()), self.faces, self.cell_faces,
                    self.cell_signs, self.face_tags, self.info)

    def submesh(self, cells):
        """Mesh made of the given cells; exposed faces without a tag get 'cut'."""
        cells = list(cells)
        used = sorted({int(f) for c in cells for f in self.cell_faces[c]})
        fmap = {f: i for i, f in enumerate(used)}
        vused = sorted({int(v) for f in used for v in self.faces[f]})
        vmap = np.full(self.n_vertices, -1)
        vmap[vused] = np.arange(len(vused))
        count = {}
        for c in cells:
            for f in self.cell_faces[c]:
                count[int(f)] = count.get(int(f), 0) + 1
        tags = [self.face_tags[f] if (count[f] == 1 and self.face_tags[f]) else
                ("cut" if count[f] == 1 else None) for f in used]
        return Mesh(self.vertices[vused], [vmap[self.faces[f]] for f in used],
                    [[fmap[int(f)] for f in self.cell_faces[c]] for c in cells],
                    [self.cell_signs[c] for c in cells], tags)

    def __repr__(self):
        return (f"Mesh(n_vertices={self.n_vertices}, n_faces={self.n_faces}, "
                f"n_cells={self.n_cells})")


def compute_cell_geometry(mesh, c):
    """Centroid, diameter and volume of cell ``c``.

    Each outward face is fanned from its centroid and coned to an apex at the
    mean of the cell vertices; signed tetrahedra give volume and first moments.
    """
    fs = mesh.cell_faces[c]
    if len(fs) < 4:
        raise TopologyError(f"cell {c} has fewer than 4 faces")
    _check_closed(mesh, c)
    verts = mesh.cell_vertices(c)
    apex = mesh.vertices[verts].mean(axis=0)
    vol = 0.0
    mom = np.zeros(3)
    for j, f in enumerate(fs):
        P = mesh.vertices[mesh.oriented_face(c, j)]
        cf = mesh.frames[f].origin
        Q = np.roll(P, -1, axis=0)
        t = np.cross(P - apex, Q - apex) @ (cf - apex) / 6.0
        vol += t.sum()
        mom += (t[:, None] * (apex + cf + P + Q)).sum(axis=0) / 4.0
    if vol <= 0.0:
        raise GeometryError(f"cell {c} has non-positive volume {vol:.3e}")
    diam = float(pdist(mesh.vertices[verts]).max())
    return mom / vol, diam, vol


def _check_closed(mesh, c):
    directed = {}
    for j in range(len(mesh.cell_faces[c])):
        cyc = mesh.oriented_face(c, j)
        for a, b in zip(cyc, np.roll(cyc, -1)):
            directed[(int(a), int(b))] = directed.get((int(a), int(b)), 0) + 1
    for (a, b), n in directed.items():
        if n != 1 or directed.get((b, a), 0) != 1:
            raise TopologyError(
                f"cell {c} surface is not closed and consistently oriented at edge ({a}, {b})")


def mesh_size(mesh):
    """Averaged mesh size ``(|Omega| / N_P) ** (1/3)``."""
    return (mesh.volume / mesh.n_cells) ** (1.0 / 3.0)


# -- construction from outward cell polygons --------------------------------

def _same_cycle(a, b):
    n = len(a)
    if n != len(b):
        return False
    try:
        i = b.index(a[0])
    except ValueError:
        return False
    return all(a[j] == b[(i + j) % n] for j in range(n))


def mesh_from_cell_polygons(vertices, cells, tag_fn=None, info=None):
    """Build a conforming mesh from cells given as outward vertex cycles.

    Faces are merged by vertex set; the first cell that lists a face owns its
    orientation.  ``tag_fn(face_vertex_coords) -> str | None`` labels faces
    that end up on the boundary.
    """
    vertices = np.asarray(vertices, float)
    faces, index = [], {}
    cell_faces, cell_signs = [], []
    for c, polys in enumerate(cells):
        fs, ss = [], []
        for cyc in polys:
            cyc = [int(v) for v in cyc]
            key = tuple(sorted(cyc))
            f = index.get(key)
            if f is None:
                f = index[key] = len(faces)
                faces.append(cyc)
                s = 1
            elif _same_cycle(cyc[::-1], faces[f]):
                s = -1
            else:
                raise TopologyError(
                    f"cell {c}: face {f} shared with mismatched vertex cycle")
            fs.append(f)
            ss.append(s)
        cell_faces.append(fs)
        cell_signs.append(ss)
    count = np.zeros(len(faces), dtype=int)
    for fs in cell_faces:
        count[fs] += 1
    tags = [None] * len(faces)
    if tag_fn is not None:
        for f in np.flatnonzero(count == 1):
            tags[f] = tag_fn(vertices[faces[f]])
    return Mesh(vertices, faces, cell_faces, cell_signs, tags, info)


def box_tagger(lo, hi, rtol=1e-10):
    """Tag function naming the box side (x0, x1, ...) a face lies on."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    tol = rtol * np.max(hi - lo)

    def tag(P):
        for ax, name in enumerate("xyz"):
            if np.all(np.abs(P[:, ax] - lo[ax]) <= tol):
                return name + "0"
            if np.all(np.abs(P[:, ax] - hi[ax]) <= tol):
                return name + "1"
        return None

    return tag


_CUBE_FACES = (
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),
    ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
    ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),
    ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
)


def build_structured_cube_mesh(n, domain=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))):
    """``n**3`` axis-aligned hexahedra filling a box, boundary faces tagged."""
    if int(n) != n or n < 1:
        raise ValueError(f"cells per axis must be a positive integer, got {n!r}")
    n = int(n)
    lo, hi = (np.asarray(d, float) for d in domain)
    t = [np.linspace(lo[a], hi[a], n + 1) for a in range(3)]
    X, Y, Z = np.meshgrid(*t, indexing="ij")
    verts = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])

    def vid(i, j, k):
        return i + (n + 1) * (j + (n + 1) * k)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                cells.append([[vid(i + a, j + b, k + c) for a, b, c in face]
                              for face in _CUBE_FACES])
    return mesh_from_cell_polygons(verts, cells, box_tagger(lo, hi),
                                   info={"family": "structured", "n": n})



def convex_polyhedron_mesh(points, tag="boundary", tol=1e-10):
    """Single-cell mesh of the convex hull of ``points``.

    Coplanar hull triangles are merged into polygonal faces; every face gets
    the boundary tag ``tag``.
    """
    from scipy.spatial import ConvexHull

    pts = np.asarray(points, float)
    hull = ConvexHull(pts)
    scale = np.ptp(pts, axis=0).max()
    groups = []
    for eq in hull.equations:
        for g in groups:
            if np.allclose(g[0], eq, atol=tol * max(1.0, scale)):
                break
        else:
            groups.append((eq, []))
    faces = []
    for eq, _ in groups:
        nrm, off = eq[:3], eq[3]
        on = np.flatnonzero(np.abs(pts @ nrm + off) <= tol * max(1.0, scale))
        P = pts[on]
        c = P.mean(axis=0)
        a1 = P[0] - c
        a1 /= np.linalg.norm(a1)
        a2 = np.cross(nrm, a1)
        ang = np.arctan2((P - c) @ a2, (P - c) @ a1)
        faces.append([int(v) for v in on[np.argsort(ang)]])
    used = sorted({v for f in faces for v in f})
    remap = {v: i for i, v in enumerate(used)}
    faces = [[remap[v] for v in f] for f in faces]
    return mesh_from_cell_polygons(pts[used], [faces], lambda P: tag,
                                   info={"family": "convex-hull"})


def extruded_polygon_mesh(polygon, z0, z1, tag="boundary"):
    """Single prism over a counter-clockwise convex polygon in the xy-plane."""
    P = np.asarray(polygon, float)
    n = len(P)
    verts = np.vstack([np.column_stack([P, np.full(n, z0)]),
                       np.column_stack([P, np.full(n, z1)])])
    faces = [list(range(n - 1, -1, -1)), list(range(n, 2 * n))]
    for i in range(n):
        j = (i + 1) % n
        faces.append([i, j, n + j, n + i])
    return mesh_from_cell_polygons(verts, [faces], lambda P: tag,
                                   info={"family": "prism"})


# -- validation -------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)

    def add(self, name, problems):
        self.checks[name] = list(problems)

    @property
    def ok(self):
        return all(not p for p in self.checks.values())

    def failed(self):
        return [k for k, v in self.checks.items() if v]

    def summary(self):
        lines = []
        for name, probs in self.checks.items():
            lines.append(f"{name}: {'ok' if not probs else 'FAIL'}")
            lines.extend(f"  {p}" for p in probs[:10])
            if len(probs) > 10:
                lines.append(f"  ... {len(probs) - 10} more")
        return "\n".join(lines)


def validate_mesh(mesh, planarity_tol=PLANARITY_TOL):
    """Run all structural and geometric checks and return a report."""
    rep = ValidationReport()

    bad = []
    for f, cyc in enumerate(mesh.faces):
        if len(cyc) < 3:
            bad.append(f"face {f} has {len(cyc)} vertices")
        elif len(set(cyc.tolist())) != len(cyc):
            bad.append(f"face {f} repeats a vertex")
        elif cyc.min() < 0 or cyc.max() >= mesh.n_vertices:
            bad.append(f"face {f} references a missing vertex")
    for c, fs in enumerate(mesh.cell_faces):
        if len(fs) and (fs.min() < 0 or fs.max() >= mesh.n_faces):
            bad.append(f"cell {c} references a missing face")
    rep.add("references", bad)
    if bad:
        return rep

    # conformity
    probs = []
    refs = np.zeros(mesh.n_faces, dtype=int)
    signs = [[] for _ in range(mesh.n_faces)]
    for c, (fs, ss) in enumerate(zip(mesh.cell_faces, mesh.cell_signs)):
        for f, s in zip(fs, ss):
            refs[f] += 1
            signs[f].append(int(s))
    for f in np.flatnonzero(refs == 0):
        probs.append(f"face {f} is not used by any cell")
    for f in np.flatnonzero(refs > 2):
        probs.append(f"face {f} is used by {refs[f]} cells")
    seen = {}
    for f, cyc in enumerate(mesh.faces):
        key = tuple(sorted(cyc.tolist()))
        if key in seen:
            probs.append(f"faces {seen[key]} and {f} cover the same vertices with "
                         "mismatched vertex cycles")
        seen[key] = f
    # the outer surface must close up (no hanging nodes or gaps)
    directed = {}
    for f in np.flatnonzero(refs == 1):
        cyc = mesh.faces[f] if signs[f][0] > 0 else mesh.faces[f][::-1]
        for a, b in zip(cyc.tolist(), np.roll(cyc, -1).tolist()):
            directed[(a, b)] = directed.get((a, b), 0) + 1
    for (a, b), cnt in directed.items():
        if directed.get((b, a), 0) != cnt:
            probs.append(f"boundary surface open at edge ({a}, {b})")
            break
    rep.add("conformity", probs)

    # planarity
    probs = []
    for f, cyc in enumerate(mesh.faces):
        P = mesh.vertices[cyc]
        Pc = P - P.mean(axis=0)
        _, _, vt = np.linalg.svd(Pc)
        dev = np.abs(Pc @ vt[-1]).max()
        hf = pdist(P).max()
        if dev > planarity_tol * hf:
            probs.append(f"face {f} deviates {dev:.3e} from its plane (h_f={hf:.3e})")
    rep.add("planarity", probs)

    # orientation and closedness of each cell surface
    probs = []
    for f in np.flatnonzero(refs == 2):
        if sum(signs[f]) != 0:
            probs.append(f"interior face {f} has the same orientation in both cells")
    for c in range(mesh.n_cells):
        try:
            _check_closed(mesh, c)
        except TopologyError as exc:
            probs.append(str(exc))
            continue
        nv = len(mesh.cell_vertices(c))
        ne = len(mesh.cell_edges(c))
        nf = len(mesh.cell_faces[c])
        if nv - ne + nf != 2:
            probs.append(f"cell {c} surface has Euler characteristic {nv - ne + nf}")
    rep.add("orientation", probs)

    # volumes
    probs = []
    if not rep.checks["orientation"]:
        for c in range(mesh.n_cells):
            try:
                _, _, v = compute_cell_geometry(mesh, c)
            except MeshError as exc:
                probs.append(str(exc))
                continue
            if v <= 0:
                probs.append(f"cell {c} has volume {v:.3e}")
    else:
        probs.append("skipped: orientation check failed")
    rep.add("positive_volume", probs)

    # boundary tags
    probs = []
    for f in range(mesh.n_faces):
        tag = mesh.face_tags[f]
        if refs[f] == 1 and not tag:
            probs.append(f"face {f}: unreferenced boundary face (one incident cell, no boundary tag)")
        elif refs[f] == 2 and tag:
            probs.append(f"interior face {f} carries boundary tag {tag!r}")
    rep.add("boundary_tags", probs)
    return rep


def check_mesh(mesh):
    rep = validate_mesh(mesh)
    if not rep.ok:
        raise MeshValidationError(rep)
    return mesh


# -- text format ------------------------------------------------------------

def write_mesh(mesh, path):
    """Write the ``polymesh 1`` text format (17 significant digits)."""
    lines = ["polymesh 1", f"vertices {mesh.n_vertices}"]
    lines += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
    lines.append(f"faces {mesh.n_faces}")
    for cyc, tag in zip(mesh.faces, mesh.face_tags):
        row = [str(len(cyc))] + [str(v) for v in cyc]
        if tag:
            row.append(tag)
        lines.append(" ".join(row))
    lines.append(f"cells {mesh.n_cells}")
    for fs, ss in zip(mesh.cell_faces, mesh.cell_signs):
        lines.append(" ".join([str(len(fs))] + [("-" if s < 0 else "") + str(f)
                                               for f, s in zip(fs, ss)]))
    Path(path).write_text("\n".join(lines) + "\n")


def _int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise MeshParseError(f"expected integer {what}, got {tok!r}", lineno) from None


def read_mesh(path):
    """Parse a ``polymesh 1`` file without validating it."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MeshParseError(f"cannot read mesh file {path}: {exc.strerror or exc}") from None
    rows = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, t) for i, t in rows if t and not t[0].startswith("#")]
    it = iter(rows)

    def nxt(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshParseError(f"unexpected end of file while reading {what}",
                                 rows[-1][0] if rows else 1) from None

    ln, toks = nxt("header")
    if toks != ["polymesh", "1"]:
        raise MeshParseError("expected header 'polymesh 1'", ln)

    def section(name):
        ln, toks = nxt(name)
        if len(toks) != 2 or toks[0] != name:
            raise MeshParseError(f"expected '{name} <count>'", ln)
        return _int(toks[1], ln, "count")

    nv = section("vertices")
    verts = np.empty((nv, 3))
    for i in range(nv):
        ln, toks = nxt("vertex")
        if len(toks) != 3:
            raise MeshParseError("vertex line needs 3 coordinates", ln)
        try:
            verts[i] = [float(t) for t in toks]
        except ValueError:
            raise MeshParseError("bad vertex coordinate", ln) from None
    nf = section("faces")
    faces, tags = [], []
    for _ in range(nf):
        ln, toks = nxt("face")
        n = _int(toks[0], ln, "vertex count")
        if len(toks) not in (n + 1, n + 2):
            raise MeshParseError(f"face line needs {n} vertex ids and an optional tag", ln)
        ids = [_int(t, ln, "vertex id") for t in toks[1:n + 1]]
        if min(ids) < 0 or max(ids) >= nv:
            raise MeshParseError("vertex id out of range", ln)
        faces.append(ids)
        tags.append(toks[n + 1] if len(toks) == n + 2 else None)
    nc = section("cells")
    cfaces, csigns = [], []
    for _ in range(nc):
        ln, toks = nxt("cell")
        m = _int(toks[0], ln, "face count")
        if len(toks) != m + 1:
            raise MeshParseError(f"cell line needs {m} face ids", ln)
        fs, ss = [], []
        for t in toks[1:]:
            neg = t.startswith("-")
            f = _int(t[1:] if neg else t, ln, "face id")
            if f >= nf:
                raise MeshParseError("face id out of range", ln)
            fs.append(f)
            ss.append(-1 if neg else 1)
        cfaces.append(fs)
        csigns.append(ss)
    for ln, toks in it:
        raise MeshParseError("trailing content after cells section", ln)
    return Mesh(verts, faces, cfaces, csigns, tags, info={"source": str(path)})


def load_mesh(path):
    """Read and validate a mesh file; raises on parse or validation failure."""
    return check_mesh(read_mesh(path))
