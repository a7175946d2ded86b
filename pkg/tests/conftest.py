import pathlib
import warnings

import numpy as np
import pytest

from polyvem.mesh import (build_structured_cube_mesh, extruded_polygon_mesh, load_mesh,
                          mesh_from_cell_polygons, box_tagger, _CUBE_FACES)

DATA = pathlib.Path(__file__).parent / "data"
OCTAHEDRON = DATA / "truncated_octahedron.polymesh"


def random_convex_polygon(rng, n=None, radius=1.0):
    """Shape-regular random convex polygon (no short edges), CCW."""
    n = n or int(rng.integers(3, 8))
    th = 2 * np.pi * (np.arange(n) + rng.uniform(-0.3, 0.3, n)) / n
    r = rng.uniform(0.7, 1.0, n) * radius
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def random_rigid(rng, scale=1.0):
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    off = rng.normal(size=3) * 3
    return lambda X: scale * X @ Q.T + off


def random_prism(rng):
    """One shape-regular random prism, randomly placed and rotated."""
    P = random_convex_polygon(rng) * rng.uniform(0.2, 2.0)
    height = rng.uniform(0.6, 1.4) * np.ptp(P[:, 0])
    return extruded_polygon_mesh(P, 0.0, height).transformed(random_rigid(rng))


def box_mesh(lo, hi):
    """Single axis-aligned box cell."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    verts = np.array([[lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1]),
                       lo[2] + c * (hi[2] - lo[2])]
                      for c in (0, 1) for b in (0, 1) for a in (0, 1)])
    vid = {(a, b, c): a + 2 * b + 4 * c for a in (0, 1) for b in (0, 1) for c in (0, 1)}
    faces = [[vid[v] for v in f] for f in _CUBE_FACES]
    return mesh_from_cell_polygons(verts, [faces], box_tagger(lo, hi))


@pytest.fixture(autouse=True)
def _quiet_conditioning_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*ill-conditioned")
        yield


@pytest.fixture(scope="session")
def unit_cube():
    return build_structured_cube_mesh(1)


@pytest.fixture(scope="session")
def cube2():
    return build_structured_cube_mesh(2)


@pytest.fixture(scope="session")
def stretched_box():
    return box_mesh((0.1, -0.3, 0.2), (1.1, 1.7, 0.7))


@pytest.fixture(scope="session")
def octahedron():
    return load_mesh(OCTAHEDRON)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    # expose the call-phase report so fixtures can print a verdict at teardown
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep
