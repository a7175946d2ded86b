"""Manufactured problems, error norms, convergence rates and the five studies."""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import ConfigError, assemble, build_dof_map, discretize, solve
from .element import StabilizationConfig
from .mesh import BOX_TAGS, build_structured_cube_mesh, load_mesh, mesh_size
from .monomials import eval_basis, eval_basis_grad
from .quadrature import polyhedron_quadrature
from .voronoi import build_prismatic_voronoi_mesh

logger = logging.getLogger(__name__)

PI = np.pi
CSV_FIELDS = ("case", "mesh_family", "N_P", "h", "k", "tau", "stab", "e_h1", "e_l2",
              "e_linf", "n_dof", "solve_iters", "wall_ms")


@dataclass
class ManufacturedProblem:
    """Exact solution with its data.  Callables take (n, 3) point arrays."""

    name: str
    u: object
    grad: object
    f: object
    reaction: bool = False
    dirichlet_tags: tuple = BOX_TAGS
    neumann_tags: tuple = None   # None: every boundary tag not in dirichlet_tags

    def r(self, x):
        return self.u(x)

    def neumann_data(self, normal):
        """``g = grad u . n`` on a face with outward unit normal ``normal``."""
        return lambda x: self.grad(x) @ normal


def _sin_cos_cos():
    def u(x):
        return np.sin(PI * x[:, 0]) * np.cos(PI * x[:, 1]) * np.cos(PI * x[:, 2])

    def grad(x):
        s, c = np.sin(PI * x), np.cos(PI * x)
        return PI * np.column_stack([c[:, 0] * c[:, 1] * c[:, 2],
                                     -s[:, 0] * s[:, 1] * c[:, 2],
                                     -s[:, 0] * c[:, 1] * s[:, 2]])

    def f(x):
        return 3 * PI**2 * u(x)

    return u, grad, f


def diffusion_problem(dirichlet_tags=("y0", "y1", "z0", "z1"), name="test1"):
    """``-Lap u = f`` with u = sin(pi x) cos(pi y) cos(pi z).

    Faces not in ``dirichlet_tags`` get Neumann data ``grad u . n``.
    """
    u, grad, f = _sin_cos_cos()
    return ManufacturedProblem(name, u, grad, f, False, tuple(dirichlet_tags))


def reaction_diffusion_problem(dirichlet_tags=BOX_TAGS):
    """``-Lap u + u = f`` with u = sin(2xy) cos(z)."""
    def u(x):
        return np.sin(2 * x[:, 0] * x[:, 1]) * np.cos(x[:, 2])

    def grad(x):
        X, Y, Z = x.T
        c = np.cos(2 * X * Y)
        return np.column_stack([2 * Y * c * np.cos(Z), 2 * X * c * np.cos(Z),
                                -np.sin(2 * X * Y) * np.sin(Z)])

    def f(x):
        X, Y, _ = x.T
        return (4 * X**2 + 4 * Y**2 + 2) * u(x)

    return ManufacturedProblem("test2", u, grad, f, True, tuple(dirichlet_tags))


def patch_problem(k, dirichlet_tags=BOX_TAGS):
    """``u = (x+y+z)^k``, reproduced exactly by the degree-k method."""
    def u(x):
        return x.sum(axis=1) ** k

    def grad(x):
        g = k * x.sum(axis=1) ** (k - 1) if k > 0 else np.zeros(len(x))
        return np.repeat(g[:, None], 3, axis=1)

    def f(x):
        if k < 2:
            return np.zeros(len(x))
        return -3.0 * k * (k - 1) * x.sum(axis=1) ** (k - 2)

    return ManufacturedProblem(f"patch{k}", u, grad, f, False, tuple(dirichlet_tags))


def zero_problem(dirichlet_tags=BOX_TAGS, reaction=False):
    def zero(x):
        return np.zeros(len(x))

    return ManufacturedProblem("zero", zero, lambda x: np.zeros((len(x), 3)), zero,
                               reaction, tuple(dirichlet_tags))


# -- error norms ------------------------------------------------------------

def _cell_rules(disc, quad_degree=None):
    deg = quad_degree or 2 * disc.k + 2
    return (polyhedron_quadrature(disc.mesh, c, deg) for c in range(disc.mesh.n_cells))


def error_h1(solution, problem, disc, quad_degree=None):
    """``sqrt(sum_P |u - Pi_nabla u_h|^2_{H1(P)})``."""
    total = 0.0
    vals = solution.values
    for ops, rule in zip(disc.cells, _cell_rules(disc, quad_degree)):
        coef = ops.pi_nabla @ vals[disc.dofmap.cell_dofs(ops.cell)]
        gh = np.einsum("qad,a->qd", eval_basis_grad(rule.points, ops.center, ops.scale, disc.k),
                       coef)
        diff = problem.grad(rule.points) - gh
        total += rule.weights @ np.einsum("qd,qd->q", diff, diff)
    return float(np.sqrt(total))


def error_l2(solution, problem, disc, quad_degree=None):
    """``sqrt(sum_P ||u - Pi0 u_h||^2_{L2(P)})``."""
    total = 0.0
    vals = solution.values
    for ops, rule in zip(disc.cells, _cell_rules(disc, quad_degree)):
        coef = ops.pi0 @ vals[disc.dofmap.cell_dofs(ops.cell)]
        diff = problem.u(rule.points) - eval_basis(rule.points, ops.center, ops.scale,
                                                   disc.k) @ coef
        total += rule.weights @ diff**2
    return float(np.sqrt(total))


def error_linf(solution, problem, disc):
    """Max nodal error over all vertices and internal edge nodes."""
    dm = disc.dofmap
    x = dm.node_coords()
    return float(np.max(np.abs(problem.u(x) - solution.values[:dm.n_nodes])))


# -- convergence rates ------------------------------------------------------

def convergence_rate(errors, sizes):
    """Per-step and least-squares slopes of log(error) against log(size).

    Returns ``(steps, overall)``.  Pass ``sizes = N_dof ** (1/3)`` for
    DOF-based slopes (these come out negative).
    """
    e = np.asarray(errors, float)
    s = np.asarray(sizes, float)
    if len(e) != len(s):
        raise ValueError("errors and sizes differ in length")
    if len(e) < 2:
        raise ValueError("need at least two records to compute a rate")
    if len(np.unique(s)) != len(s):
        raise ValueError("convergence rate needs distinct mesh sizes")
    if np.any(e <= 0) or np.any(s <= 0):
        raise ValueError("errors and sizes must be positive")
    le, ls = np.log(e), np.log(s)
    steps = np.diff(le) / np.diff(ls)
    overall = np.polyfit(ls, le, 1)[0]
    return steps, float(overall)


# -- runs -------------------------------------------------------------------

@dataclass
class ConvergenceRecord:
    case: int
    mesh_family: str
    n_cells: int
    h: float
    k: int
    tau: float
    stab: str
    e_h1: float
    e_l2: float
    e_linf: float
    n_dof: int
    solve_iters: int
    wall_ms: float = 0.0
    mesh_id: str = ""

    def row(self):
        g = "{:.17g}".format
        return [str(self.case), self.mesh_family, str(self.n_cells), g(self.h), str(self.k),
                g(self.tau), self.stab, g(self.e_h1), g(self.e_l2), g(self.e_linf),
                str(self.n_dof), str(self.solve_iters), g(self.wall_ms)]


def run_single(mesh, k, problem, stab=StabilizationConfig(), *, disc=None, solver="cg",
               tol=1e-12, quad_degree=None, threads=None, case=0, timings=False):
    """Assemble, solve and measure one configuration.

    ``disc`` may be a prepared discretization of the same mesh and degree,
    which is how stabilization sweeps avoid recomputing operators.
    Returns ``(record, solution, disc)``.
    """
    t0 = time.perf_counter()
    if disc is None:
        dm = build_dof_map(mesh, k, problem.dirichlet_tags)
        disc = discretize(mesh, k, dm, forcing=problem.f, quad_degree=quad_degree,
                          threads=threads)
    system = assemble(disc, problem, stab, threads=threads)
    sol = solve(system, tol=tol, method=solver)
    rec = ConvergenceRecord(
        case, mesh.info.get("family", "file"), mesh.n_cells, mesh_size(mesh), k, stab.tau,
        stab.kind, error_h1(sol, problem, disc, quad_degree),
        error_l2(sol, problem, disc, quad_degree), error_linf(sol, problem, disc),
        disc.dofmap.size, sol.iterations,
        (time.perf_counter() - t0) * 1e3 if timings else 0.0)
    return rec, sol, disc


DEFAULT_LADDERS = {1: (4, 8, 16), 2: (3, 6, 12), 3: (2, 4, 8), 4: (2, 3, 4)}


@dataclass
class StudyConfig:
    """Settings for :func:`run_test_case`.  ``None`` means the case default."""

    k: tuple = None
    refinements: tuple = None        # one ladder for every k; default per k
    mesh_family: str = None          # "structured" | "prismatic-voronoi" | "file"
    mesh_file: str = None
    layers: int = None               # prismatic-voronoi: layers (default = refinement)
    lloyd: int = None                # Lloyd iterations (CVT-like meshes by default)
    seed: int = 0
    stab: tuple = None               # stabilization kinds
    tau: float = 1.0
    tau_points: int = 25
    tau_range: tuple = (-2.0, 2.0)   # log10 bounds of the sweep
    delta_range: tuple = (0.1, 10.0)
    solver: str = "cg"
    tol: float = 1e-12
    quad_degree: int = None
    threads: int = None
    timings: bool = False


@dataclass
class StudyResult:
    case: int
    records: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)    # (k, stab, key) -> (steps, overall)
    deltas: dict = field(default_factory=dict)   # (k, stab) -> (delta_h1, delta_linf)

    def csv_text(self):
        return records_to_csv(self.records)


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def make_mesh(family, n, cfg):
    """Mesh of the unit cube for one refinement level ``n``."""
    if family == "structured":
        return build_structured_cube_mesh(n)
    if family == "prismatic-voronoi":
        return build_prismatic_voronoi_mesh(n * n, cfg.layers or n, rng_seed=cfg.seed,
                                            lloyd_iters=cfg.lloyd)
    if family == "file":
        if not cfg.mesh_file:
            raise ConfigError("mesh_family 'file' needs mesh_file")
        return load_mesh(cfg.mesh_file)
    raise ConfigError(f"unknown mesh family {family!r}")


_CASE_DEFAULTS = {
    1: dict(k=(1, 2, 3), mesh_family="structured", stab=("dofi",), lloyd=0),
    2: dict(k=(1, 2, 3), mesh_family="prismatic-voronoi", stab=("dofi",), lloyd=50),
    3: dict(k=(1, 2, 3, 4), mesh_family="prismatic-voronoi", stab=("dofi", "recipe"),
            refinements=(5,), layers=4, lloyd=50),
    4: dict(k=(1, 2, 3, 4), mesh_family="prismatic-voronoi", stab=("dofi",),
            refinements=(4,), layers=2, lloyd=50),
    5: dict(k=(1, 2), mesh_family="prismatic-voronoi", stab=("dofi",),
            refinements=(8,), layers=8, lloyd=50),
}


def resolve_config(case_id, cfg=None):
    """Fill the ``None`` fields of ``cfg`` with the defaults of ``case_id``."""
    if case_id not in _CASE_DEFAULTS:
        raise ConfigError(f"unknown test case {case_id!r}; expected 1..5")
    cfg = cfg or StudyConfig()
    upd = {k: v for k, v in _CASE_DEFAULTS[case_id].items() if getattr(cfg, k) is None}
    cfg = replace(cfg, **upd)
    if cfg.mesh_file and cfg.mesh_family != "file" and "mesh_family" in upd:
        cfg = replace(cfg, mesh_family="file")
    if not cfg.tau > 0:
        raise ConfigError("tau must be positive")
    if cfg.tau_points < 2 and case_id == 5:
        raise ConfigError("tau sweep needs at least two points")
    return cfg


def _problem_for(case_id, k, mesh):
    tags = tuple(mesh.boundary_tags())
    if case_id == 1:
        if not {"y0", "y1", "z0", "z1"} <= set(tags):
            raise ConfigError("test case 1 needs a box mesh with tagged sides")
        return diffusion_problem()
    if case_id == 2:
        return reaction_diffusion_problem(tags)
    if case_id in (3, 5):
        return diffusion_problem(tags, name=f"test{case_id}")
    return patch_problem(k, tags)


def run_test_case(case_id, cfg=None, csv_path=None):
    """Run one of the five studies and return a :class:`StudyResult`."""
    cfg = resolve_config(case_id, cfg)
    res = StudyResult(case_id)
    mesh_cache = {}

    def mesh_for(n):
        if n not in mesh_cache:
            mesh_cache[n] = make_mesh(cfg.mesh_family, n, cfg)
        return mesh_cache[n]

    common = dict(solver=cfg.solver, tol=cfg.tol, quad_degree=cfg.quad_degree,
                  threads=cfg.threads, case=case_id, timings=cfg.timings)
    if cfg.mesh_family == "file":
        ladder_for = {k: (0,) for k in cfg.k}
    elif cfg.refinements:
        ladder_for = {k: tuple(cfg.refinements) for k in cfg.k}
    else:
        ladder_for = {k: DEFAULT_LADDERS.get(k, DEFAULT_LADDERS[3]) for k in cfg.k}

    if case_id == 5:
        taus = 10.0 ** np.linspace(*cfg.tau_range, cfg.tau_points)
        for k in cfg.k:
            mesh = mesh_for(ladder_for[k][0])
            prob = _problem_for(5, k, mesh)
            disc = None
            for kind in cfg.stab:
                for tau in taus:
                    rec, _, disc = run_single(mesh, k, prob, StabilizationConfig(kind, tau),
                                              disc=disc, **common)
                    res.records.append(rec)
                sel = [r for r in res.records if r.k == k and r.stab == kind
                       and cfg.delta_range[0] * (1 - 1e-12) <= r.tau
                       <= cfg.delta_range[1] * (1 + 1e-12)]
                if sel:
                    res.deltas[(k, kind)] = tau_ratios(sel)
    else:
        for k in cfg.k:
            for n in ladder_for[k]:
                mesh = mesh_for(n)
                prob = _problem_for(case_id, k, mesh)
                disc = None
                for kind in cfg.stab:
                    rec, _, disc = run_single(mesh, k, prob, StabilizationConfig(kind, cfg.tau),
                                              disc=disc, **common)
                    logger.info("case %d k=%d n=%s %s: e_h1=%.3e", case_id, k, n, kind, rec.e_h1)
                    res.records.append(rec)
        res.rates = study_rates(case_id, res.records)
    if csv_path:
        write_csv(res.records, csv_path)
    return res


def tau_ratios(records):
    """``(delta_h1, delta_linf)``: max/min error ratios over the given runs."""
    def ratio(e):
        e = np.asarray(e)
        if e.max() == 0:
            return 1.0      # exact for every tau
        return float(e.max() / e.min()) if e.min() > 0 else float("inf")

    return ratio([r.e_h1 for r in records]), ratio([r.e_linf for r in records])


def study_rates(case_id, records):
    """Rates per (k, stab, norm).

    Cases 1 and 4 use h; case 2 uses ``N_dof^(1/3)`` (negative slopes); case 3
    runs on a fixed mesh, so slopes go across k against ``N_dof^(1/3)``.
    """
    out = {}
    stabs = sorted({r.stab for r in records})
    for stab in stabs:
        rs = [r for r in records if r.stab == stab]
        if case_id == 3:
            rs.sort(key=lambda r: r.k)
            if len(rs) >= 2:
                size = [r.n_dof ** (1 / 3) for r in rs]
                for key in ("e_h1", "e_l2", "e_linf"):
                    out[("all", stab, key)] = convergence_rate([getattr(r, key) for r in rs], size)
            continue
        for k in sorted({r.k for r in rs}):
            rk = sorted((r for r in rs if r.k == k), key=lambda r: -r.h)
            if len(rk) < 2:
                continue
            size = [r.n_dof ** (1 / 3) for r in rk] if case_id == 2 else [r.h for r in rk]
            for key in ("e_h1", "e_l2", "e_linf"):
                vals = [getattr(r, key) for r in rk]
                if min(vals) > 0:
                    out[(k, stab, key)] = convergence_rate(vals, size)
    return out


def format_rates(result):
    """Plain-text table of overall rates (and tau ratios for case 5)."""
    lines = []
    if result.deltas:
        lines.append(f"{'k':>3} {'stab':>7} {'delta_h1':>12} {'delta_linf':>12}")
        for (k, stab), (dh, dl) in sorted(result.deltas.items()):
            lines.append(f"{k:>3} {stab:>7} {dh:12.4e} {dl:12.4e}")
        return "\n".join(lines)
    lines.append(f"{'k':>4} {'stab':>7} {'norm':>7} {'overall':>9}  steps")
    for (k, stab, key), (steps, overall) in sorted(result.rates.items(), key=str):
        st = " ".join(f"{s:8.4f}" for s in steps)
        lines.append(f"{k!s:>4} {stab:>7} {key[2:]:>7} {overall:9.4f}  {st}")
    return "\n".join(lines)
