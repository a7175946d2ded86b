import numpy as np
import pytest
import scipy.sparse as sp

from polyvem.analysis import (diffusion_problem, error_linf, patch_problem, run_single,
                              zero_problem)
from polyvem.assembly import (ConfigError, LinearSystem, SolverError, assemble, build_dof_map,
                              discretize, export_matrix, interpolate_dirichlet, pcg, solve)
from polyvem.element import (StabilizationConfig, cell_dof_layout, compute_cell_operators,
                             local_load, local_stiffness)
from polyvem.face import compute_face_spaces
from polyvem.mesh import BOX_TAGS, Mesh, build_structured_cube_mesh
from polyvem.monomials import eval_basis
from polyvem.voronoi import build_prismatic_voronoi_mesh


def test_dof_counts(unit_cube, cube2):
    assert build_dof_map(unit_cube, 2).size == 27
    assert build_dof_map(cube2, 1).size == 27
    m = build_structured_cube_mesh(3)
    for k in (1, 2, 3, 4):
        dm = build_dof_map(m, k)
        nmf = (k - 1) * k // 2
        nmc = (k - 1) * k * (k + 1) // 6
        assert dm.size == m.n_vertices + m.n_edges * (k - 1) + m.n_faces * nmf + m.n_cells * nmc


def test_all_dirichlet_leaves_interior_vertices(cube2):
    dm = build_dof_map(cube2, 1, BOX_TAGS)
    free = np.flatnonzero(~dm.dirichlet)
    assert len(free) == 1
    assert np.allclose(cube2.vertices[free[0]], 0.5)


def test_dirichlet_mask_covers_boundary_entities(cube2):
    k = 3
    dm = build_dof_map(cube2, k, ("x0",))
    on = np.isclose(dm.node_coords()[:, 0], 0.0)
    assert np.array_equal(dm.dirichlet[:dm.n_nodes], on)
    faces = [f for f in cube2.boundary_faces if cube2.face_tags[f] == "x0"]
    assert np.all(dm.dirichlet[dm.face_moment_dofs(faces)])
    assert dm.dirichlet.sum() == on.sum() + len(faces) * dm.n_face_moments


def test_unknown_tag_and_bad_degree(unit_cube):
    with pytest.raises(ConfigError, match="unknown boundary tag"):
        build_dof_map(unit_cube, 1, ("north",))
    with pytest.raises(ConfigError):
        build_dof_map(unit_cube, 0)


def test_gather_lists_match_local_layout(cube2):
    k = 3
    dm = build_dof_map(cube2, k)
    seen = np.zeros(dm.size, dtype=int)
    for c in range(cube2.n_cells):
        g = dm.cell_dofs(c)
        assert len(set(g.tolist())) == len(g) == cell_dof_layout(cube2, c, k).size
        seen[g] += 1
    assert seen.min() >= 1
    # shared faces: the face's gather list sits inside both cells' lists
    for f in np.flatnonzero(cube2.face_cells[:, 1] >= 0):
        gf = set(dm.face_dofs(f).tolist())
        for c in cube2.face_cells[f]:
            assert gf <= set(dm.cell_dofs(c).tolist())


def test_shared_dofs_agree_between_cells():
    # a smooth function's local DOF vectors agree on shared entities
    from polyvem.element import cell_dofs_of_function
    m = build_prismatic_voronoi_mesh(6, 2, rng_seed=4)
    k = 3
    dm = build_dof_map(m, k)
    fn = lambda X: np.cos(X[:, 0]) + X[:, 1] * X[:, 2] ** 2
    glob = np.full(dm.size, np.nan)
    for c in range(m.n_cells):
        loc = cell_dofs_of_function(m, c, k, fn)
        g = dm.cell_dofs(c)
        known = ~np.isnan(glob[g])
        assert np.allclose(glob[g][known], loc[known], rtol=1e-13, atol=1e-13)
        glob[g] = loc


def test_interpolate_dirichlet(unit_cube):
    k = 3
    dm = build_dof_map(unit_cube, k, ("z0", "x1"))
    vals = interpolate_dirichlet(unit_cube, k, lambda X: np.full(len(X), 2.5), dm)
    fixed = dm.dirichlet
    assert np.all(np.isnan(vals[~fixed]))
    assert np.allclose(vals[fixed][:0], 2.5)
    nodes = np.flatnonzero(fixed[:dm.n_nodes])
    assert np.all(vals[nodes] == 2.5)
    fsp = compute_face_spaces(unit_cube, k)
    for f in dm.dirichlet_faces:
        mom = vals[dm.face_moment_dofs([f])]
        # (1/|f|) int 2.5 m_a: 2.5 for the constant, 0 for centered linears
        assert np.allclose(mom, [2.5, 0, 0], atol=1e-14)
        # a face monomial gives H_f entries / |f|
        fs = fsp[f]
        fr = fs.frame
        r = lambda X: fr.to_local(X)[:, 0] / fs.scale
        v = interpolate_dirichlet(unit_cube, k, r, dm)[dm.face_moment_dofs([f])]
        assert np.allclose(v, fs.H[1, :3] / fs.area, atol=1e-14)


def dense_scatter(disc, stab):
    n = disc.dofmap.size
    A = np.zeros((n, n))
    for ops in disc.cells:
        g = disc.dofmap.cell_dofs(ops.cell)
        K, _ = local_stiffness(ops, stab)
        for a, i in enumerate(g):
            for b, j in enumerate(g):
                A[i, j] += K[a, b]
    return A


@pytest.mark.parametrize("k", [1, 2, 3])
def test_two_cell_assembly_matches_dense_oracle(k):
    m = build_structured_cube_mesh(2).submesh([0, 1])
    prob = zero_problem(dirichlet_tags=())
    disc = discretize(m, k, build_dof_map(m, k))
    stab = StabilizationConfig("recipe", 0.7)
    sys_ = assemble(disc, prob, stab)
    assert np.allclose(sys_.matrix.toarray(), dense_scatter(disc, stab), rtol=0, atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_symmetry_and_neumann_kernel(cube2, k):
    disc = discretize(cube2, k, build_dof_map(cube2, k))
    A = assemble(disc, zero_problem(dirichlet_tags=())).matrix
    amax = abs(A).max()
    assert abs(A - A.T).max() < 1e-12 * amax
    one = np.zeros(disc.dofmap.size)
    one[:disc.dofmap.n_nodes] = 1.0
    # constant DOF vector: point values 1, face/cell moments of 1
    for ops in disc.cells:
        g = disc.dofmap.cell_dofs(ops.cell)
        one[g] = ops.D[:, 0]
    assert np.abs(A @ one).max() <= 1e-10 * amax


def test_assembly_order_independent():
    m = build_prismatic_voronoi_mesh(9, 2, rng_seed=1)
    k = 2
    prob = patch_problem(k)
    disc = discretize(m, k, build_dof_map(m, k, prob.dirichlet_tags), forcing=prob.f)
    A = assemble(disc, prob).matrix
    perm = np.random.default_rng(0).permutation(m.n_cells)
    cells = [disc.cells[c] for c in perm]
    loads = [disc.loads[c] for c in perm]
    dm = disc.dofmap

    class PermMap:
        size = dm.size

        def cell_dofs(self, i):
            return dm.cell_dofs(perm[i])

    from polyvem.assembly import _scatter
    blocks = [local_stiffness(o)[0] for o in cells]
    Ap = _scatter(PermMap(), blocks, dm.size)
    assert abs(A - Ap).max() <= 1e-13 * abs(A).max()
    assert len(loads) == m.n_cells


def test_neumann_and_dirichlet_overlap_rejected(unit_cube):
    prob = diffusion_problem(("x0",))
    prob.neumann_tags = ("x0", "x1")
    disc = discretize(unit_cube, 1, build_dof_map(unit_cube, 1, ("x0",)))
    with pytest.raises(ConfigError, match="both Dirichlet and Neumann"):
        assemble(disc, prob)
    with pytest.raises(ConfigError):
        assemble(disc, diffusion_problem(("x1",)))


def test_identity_solve():
    n = 7
    b = np.arange(1.0, n + 1)
    A = sp.identity(n, format="csr")
    s = LinearSystem(A, b, np.arange(n), np.array([], int), np.array([]), A, b)
    sol = solve(s)
    assert np.array_equal(sol.values, b)
    assert sol.iterations == 1
    assert np.array_equal(solve(s, method="direct").values, b)


def test_pcg_reports_history_on_failure():
    rng = np.random.default_rng(0)
    Q = rng.normal(size=(40, 40))
    A = sp.csr_matrix(Q @ Q.T + 1e-3 * np.eye(40))
    with pytest.raises(SolverError) as exc:
        pcg(A, rng.normal(size=40), tol=1e-14, max_iter=3)
    assert len(exc.value.history) == 4
    assert "did not converge" in str(exc.value)


def test_unknown_solver(unit_cube):
    prob = patch_problem(1)
    disc = discretize(unit_cube, 1, build_dof_map(unit_cube, 1, BOX_TAGS), forcing=prob.f)
    with pytest.raises(ConfigError):
        solve(assemble(disc, prob), method="lu")


@pytest.mark.parametrize("k", [2, 3])
def test_patch_solve(k):
    m = build_prismatic_voronoi_mesh(9, 2, rng_seed=3, lloyd_iters=5)
    prob = patch_problem(k)
    rec, sol, disc = run_single(m, k, prob)
    assert sol.residual <= 1e-12
    assert rec.e_linf <= 1e-9
    fixed = disc.dofmap.dirichlet
    vals = interpolate_dirichlet(m, k, prob.r, disc.dofmap)
    assert np.array_equal(sol.values[fixed], vals[fixed])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cg_matches_direct(k):
    m = build_structured_cube_mesh(2)
    prob = diffusion_problem()
    a, sa, _ = run_single(m, k, prob)
    b, sb, _ = run_single(m, k, prob, solver="direct")
    assert np.allclose(sa.values, sb.values, rtol=0, atol=1e-10 * np.abs(sb.values).max())
    assert sb.method == "direct" and sa.method == "cg"


def test_thread_count_does_not_change_results():
    m = build_prismatic_voronoi_mesh(16, 2, rng_seed=0)
    prob = diffusion_problem()
    out = []
    for threads in (1, 3):
        rec, sol, disc = run_single(m, 2, prob, threads=threads)
        out.append((sol.values, disc, rec))
    assert np.array_equal(out[0][0], out[1][0])
    assert out[0][2].row() == out[1][2].row()


def test_pinned_structured_regression():
    # 4^3 cubes, k = 1, sin/cos solution with Neumann data on x0, x1
    m = build_structured_cube_mesh(4)
    rec, sol, disc = run_single(m, 1, diffusion_problem())
    assert rec.n_dof == 125
    assert 0 < sol.iterations < 125
    assert rec.e_h1 == pytest.approx(0.7638540338529713, rel=1e-10)
    assert rec.e_l2 == pytest.approx(0.06390895967344637, rel=1e-10)
    assert rec.e_linf == pytest.approx(0.048347004592214395, rel=1e-10)
    assert error_linf(sol, diffusion_problem(), disc) == rec.e_linf


def test_export_matrix(tmp_path):
    A = sp.csr_matrix(np.array([[4.0, 1.0, 0.0], [1.0, 3.0, -0.5], [0.0, -0.5, 2.0]]))
    p = tmp_path / "a.mtx"
    export_matrix(A, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "3 3 5"
    rows = [tuple(map(float, l.split())) for l in lines[1:]]
    assert rows == [(1, 1, 4.0), (2, 1, 1.0), (2, 2, 3.0), (3, 2, -0.5), (3, 3, 2.0)]
    # 17 significant digits round-trip
    B = sp.csr_matrix(np.array([[1 / 3]]))
    export_matrix(B, p)
    assert float(p.read_text().splitlines()[1].split()[2]) == 1 / 3


def test_reaction_adds_mass(unit_cube):
    from polyvem.analysis import reaction_diffusion_problem
    prob = reaction_diffusion_problem(())
    disc = discretize(unit_cube, 2, build_dof_map(unit_cube, 2))
    A = assemble(disc, prob).matrix
    # with mass, the pure-Neumann matrix is nonsingular
    assert np.linalg.eigvalsh(A.toarray())[0] > 1e-6
