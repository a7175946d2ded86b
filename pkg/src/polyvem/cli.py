"""Command-line front end: ``generate``, ``validate``, ``solve`` and ``study``.

Every option can also come from a TOML config file (``--config``); command
line flags override the file.  Unknown config keys are rejected.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analysis import (StudyConfig, diffusion_problem, format_rates, patch_problem,
                       reaction_diffusion_problem, records_to_csv, run_single, run_test_case)
from .assembly import THREADS_ENV, ConfigError, SolverError, export_matrix
from .element import STABILIZATIONS, StabilizationConfig
from .mesh import (MeshError, build_structured_cube_mesh, load_mesh, mesh_size, read_mesh,
                   validate_mesh, write_mesh)
from .voronoi import build_prismatic_voronoi_mesh

log = logging.getLogger("polyvem")

CONFIG_SCHEMA = {
    "mesh": {"file": str, "structured": int, "seeds": int, "layers": int, "lloyd": int,
             "seed": int, "family": str},
    "problem": {"case": int, "k": (int, list), "dirichlet": list},
    "stabilization": {"kind": str, "tau": (int, float)},
    "solver": {"method": str, "tol": float, "threads": int, "quad_degree": int},
    "study": {"refinements": list, "tau_points": int, "tau_min": (int, float),
              "tau_max": (int, float), "timings": bool},
    "output": {"csv": str, "dump": str, "mesh": str, "matrix": str},
}


def load_config(path):
    """Read and schema-check a TOML config; returns ``{section: {key: value}}``."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for sec, body in data.items():
        if sec not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: [{sec}] must be a table")
        for key, val in body.items():
            if key not in CONFIG_SCHEMA[sec]:
                raise ConfigError(f"{path}: unknown key {sec}.{key}")
            typ = CONFIG_SCHEMA[sec][key]
            if isinstance(val, bool) and typ is not bool:
                raise ConfigError(f"{path}: {sec}.{key} has the wrong type")
            if not isinstance(val, typ):
                raise ConfigError(f"{path}: {sec}.{key} has the wrong type")
    tau = data.get("stabilization", {}).get("tau")
    if tau is not None and not tau > 0:
        raise ConfigError(f"{path}: stabilization.tau must be > 0")
    return data


def _int_list(text):
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _voronoi_spec(text):
    """Parse ``seeds=16 layers=4 lloyd=50 seed=7`` (spaces or commas)."""
    out = {}
    for tok in text.replace(",", " ").split():
        key, sep, val = tok.partition("=")
        if not sep or key not in ("seeds", "layers", "lloyd", "seed"):
            raise argparse.ArgumentTypeError(f"bad voronoi parameter {tok!r}")
        try:
            out[key] = int(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value in {tok!r}")
    if "seeds" not in out:
        raise argparse.ArgumentTypeError("voronoi spec needs seeds=N")
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="polyvem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def mesh_opts(q):
        q.add_argument("--mesh", help="polymesh file")
        q.add_argument("--structured", type=_positive_int, metavar="N",
                       help="N x N x N cube mesh")
        q.add_argument("--prismatic-voronoi", type=_voronoi_spec, metavar="SPEC",
                       help='e.g. "seeds=16 layers=4 lloyd=50 seed=7"')

    def common(q):
        q.add_argument("--config", help="TOML config file")
        q.add_argument("--threads", type=_positive_int,
                       help=f"worker threads (default: ${THREADS_ENV} or 1)")
        q.add_argument("--solver", choices=("cg", "direct"))
        q.add_argument("--tol", type=float)
        q.add_argument("--quad-degree", type=_positive_int)
        q.add_argument("--stab", choices=STABILIZATIONS)
        q.add_argument("--tau", type=float)

    g = sub.add_parser("generate", help="write a mesh file")
    mesh_opts(g)
    g.add_argument("--config")
    g.add_argument("-o", "--output", help="output polymesh path")

    v = sub.add_parser("validate", help="check a mesh file")
    v.add_argument("mesh")

    s = sub.add_parser("solve", help="one solve, one CSV row")
    mesh_opts(s)
    common(s)
    s.add_argument("--case", type=int, choices=range(1, 6), help="manufactured problem")
    s.add_argument("--k", type=_positive_int)
    s.add_argument("--dirichlet", help="comma-separated boundary tags")
    s.add_argument("--csv", help="append-free CSV output (default stdout)")
    s.add_argument("--dump", help="write the DOF vector as 'index value' lines")
    s.add_argument("--matrix", help="export the assembled matrix (coordinate text)")

    t = sub.add_parser("study", help="run one of the five studies")
    t.add_argument("case", type=int, choices=range(1, 6))
    common(t)
    t.add_argument("--k", type=_int_list)
    t.add_argument("--refinements", type=_int_list)
    t.add_argument("--mesh-family", choices=("structured", "prismatic-voronoi", "file"))
    t.add_argument("--mesh", help="polymesh file (mesh family 'file')")
    t.add_argument("--layers", type=_positive_int)
    t.add_argument("--lloyd", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--tau-points", type=_positive_int)
    t.add_argument("--timings", action="store_true", default=None,
                   help="record wall_ms (otherwise 0, keeping the CSV reproducible)")
    t.add_argument("-o", "--csv", help="CSV output path (default stdout)")
    return p


def _pick(flag, cfg, sec, key, default=None):
    if flag is not None:
        return flag
    return cfg.get(sec, {}).get(key, default)


def _mesh_from(args, cfg):
    mc = cfg.get("mesh", {})
    vor = getattr(args, "prismatic_voronoi", None)
    if args.mesh or (not args.structured and not vor and "file" in mc):
        return load_mesh(args.mesh or mc["file"])
    n = args.structured or (None if vor else mc.get("structured"))
    if n:
        return build_structured_cube_mesh(n)
    spec = dict(vor or {})
    if not spec and "seeds" in mc:
        spec = {k: mc[k] for k in ("seeds", "layers", "lloyd", "seed") if k in mc}
    if spec:
        return build_prismatic_voronoi_mesh(spec["seeds"], spec.get("layers", 1),
                                            rng_seed=spec.get("seed", 0),
                                            lloyd_iters=spec.get("lloyd", 0))
    raise ConfigError("no mesh given: use --mesh, --structured or --prismatic-voronoi")


def _describe(mesh, out):
    rep = validate_mesh(mesh)
    print(f"N_P = {mesh.n_cells}", file=out)
    print(f"h = {mesh_size(mesh):.17g}", file=out)
    print(f"vertices = {mesh.n_vertices}, faces = {mesh.n_faces}, edges = {mesh.n_edges}",
          file=out)
    print(rep.summary(), file=out)
    return rep


def cmd_generate(args, cfg, out):
    mesh = _mesh_from(args, cfg)
    rep = _describe(mesh, out)
    if not rep.ok:
        return 1
    path = args.output or cfg.get("output", {}).get("mesh")
    if path:
        write_mesh(mesh, path)
        print(f"wrote {path}", file=out)
    return 0


def cmd_validate(args, cfg, out):
    mesh = read_mesh(args.mesh)
    return 0 if _describe(mesh, out).ok else 1


def _problem(case, k, tags):
    if case == 1:
        return diffusion_problem(tags or ("y0", "y1", "z0", "z1"))
    if case == 2:
        return reaction_diffusion_problem(tags)
    if case in (3, 5):
        return diffusion_problem(tags, name=f"test{case}")
    return patch_problem(k, tags)


def cmd_solve(args, cfg, out):
    mesh = _mesh_from(args, cfg)
    k = _pick(args.k, cfg, "problem", "k", 1)
    if isinstance(k, list):
        raise ConfigError("solve takes a single k")
    case = _pick(args.case, cfg, "problem", "case", 4)
    if case not in range(1, 6):
        raise ConfigError(f"unknown case {case}")
    tags = args.dirichlet.split(",") if args.dirichlet else cfg.get("problem", {}).get("dirichlet")
    if tags is None:
        tags = None if case == 1 else tuple(mesh.boundary_tags())
    prob = _problem(case, k, tuple(tags) if tags else None)
    stab = StabilizationConfig(_pick(args.stab, cfg, "stabilization", "kind", "dofi"),
                               _pick(args.tau, cfg, "stabilization", "tau", 1.0))
    rec, sol, disc = run_single(
        mesh, k, prob, stab, solver=_pick(args.solver, cfg, "solver", "method", "cg"),
        tol=_pick(args.tol, cfg, "solver", "tol", 1e-12),
        quad_degree=_pick(args.quad_degree, cfg, "solver", "quad_degree"),
        threads=_pick(args.threads, cfg, "solver", "threads"), case=case)
    rec.mesh_family = mesh.info.get("family", "file")
    text = records_to_csv([rec])
    path = _pick(args.csv, cfg, "output", "csv")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    dump = _pick(args.dump, cfg, "output", "dump")
    if dump:
        with open(dump, "w") as fh:
            for i, v in enumerate(sol.values):
                fh.write(f"{i} {v:.17g}\n")
    mpath = _pick(args.matrix, cfg, "output", "matrix")
    if mpath:
        from .assembly import assemble
        export_matrix(assemble(disc, prob, stab).matrix, mpath)
    return 0


def cmd_study(args, cfg, out):
    st = cfg.get("study", {})
    mc = cfg.get("mesh", {})
    pc = cfg.get("problem", {})
    k = _pick(args.k, cfg, "problem", "k")
    if isinstance(k, int):
        k = [k]
    sc = StudyConfig(
        k=tuple(k) if k else None,
        refinements=tuple(_pick(args.refinements, cfg, "study", "refinements") or ()) or None,
        mesh_family=_pick(args.mesh_family, cfg, "mesh", "family"),
        mesh_file=args.mesh or mc.get("file"),
        layers=_pick(args.layers, cfg, "mesh", "layers"),
        lloyd=_pick(args.lloyd, cfg, "mesh", "lloyd"),
        seed=_pick(args.seed, cfg, "mesh", "seed", 0),
        stab=(args.stab,) if args.stab else
        ((cfg["stabilization"]["kind"],) if "kind" in cfg.get("stabilization", {}) else None),
        tau=_pick(args.tau, cfg, "stabilization", "tau", 1.0),
        tau_points=_pick(args.tau_points, cfg, "study", "tau_points", 25),
        solver=_pick(args.solver, cfg, "solver", "method", "cg"),
        tol=_pick(args.tol, cfg, "solver", "tol", 1e-12),
        quad_degree=_pick(args.quad_degree, cfg, "solver", "quad_degree"),
        threads=_pick(args.threads, cfg, "solver", "threads"),
        timings=bool(_pick(args.timings, cfg, "study", "timings", False)),
    )
    if "tau_min" in st or "tau_max" in st:
        lo, hi = st.get("tau_min", 1e-2), st.get("tau_max", 1e2)
        if not (0 < lo < hi):
            raise ConfigError("need 0 < tau_min < tau_max")
        sc = replace(sc, tau_range=(float(np.log10(lo)), float(np.log10(hi))))
    if pc.get("case") not in (None, args.case):
        raise ConfigError("problem.case in the config disagrees with the study case")
    res = run_test_case(args.case, sc)
    text = res.csv_text()
    path = _pick(args.csv, cfg, "output", "csv")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
        print(f"wrote {path}", file=out)
    else:
        out.write(text)
    print(format_rates(res), file=out if path else sys.stderr)
    return 0


COMMANDS = {"generate": cmd_generate, "validate": cmd_validate, "solve": cmd_solve,
            "study": cmd_study}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "tau", None) is not None and not args.tau > 0:
            raise ConfigError("tau must be > 0")
        cfg = load_config(args.config) if getattr(args, "config", None) else {}
        return COMMANDS[args.command](args, cfg, out)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
