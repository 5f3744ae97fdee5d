"""Command-line front end: ``curvefem mesh|solve|sweep|eps-sweep|check``.

Every flag may also come from a JSON config file (``--config``) whose keys
are the flag names with dashes replaced by underscores; flags given on the
command line win.  Files written without an explicit ``--output`` go to the
directory named by ``CURVEFEM_OUT_DIR`` (default: the working directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .analysis import (REFERENCES, SweepConfig, error_norms, export_error_field, format_value,
                       records_to_csv, records_to_markdown, run_eps_sweep, run_sweep, solve_problem)
from .geometry import CubicGraph, check_assumption1, classify_boundary, make_geometry
from .linalg import write_coo
from .mesh import (build_annulus_mesh, build_cubic_fixture_mesh, build_disc_mesh, mesh_stats,
                   write_mesh)
from .methods import MethodConfig

OUT_DIR_ENV = "CURVEFEM_OUT_DIR"
METHOD_NAMES = {"plain": "plain", "bdt": "bdt", "robin": "robin", "bdt-sym": "bdt_symmetric"}
F_EXT_NAMES = {"analytic": "analytic", "p1": "linear_interpolant"}
# refinement levels used by ``check`` to judge whether beta stays bounded
CHECK_LEVELS = 3
BETA_GROWTH = 1.5

logger = logging.getLogger("curvefem")


class UsageError(Exception):
    pass


def _out_path(name: str) -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, ".")) / name


def _fmt(v) -> str:
    return format_value(v, 3)


# ---------------------------------------------------------------- parser

def _add_domain(p, choices=("disc", "annulus")):
    p.add_argument("--domain", choices=choices, default=None)
    p.add_argument("--radius", type=float, default=None, help="outer radius (default 1)")
    p.add_argument("--inner-radius", type=float, default=None, help="annulus hole radius (default 0.5)")


def _add_method(p, eps_list: bool = False):
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default=None)
    p.add_argument("--k", type=int, default=None, help="polynomial degree 1..5 (default 2)")
    p.add_argument("--gamma", type=float, default=None, help="Nitsche penalty, bdt and bdt-sym only (default 100)")
    if eps_list:
        p.add_argument("--eps", type=float, nargs="+", default=None, help="Robin regularizations to run")
    else:
        p.add_argument("--eps", type=float, default=None, help="Robin regularization (default 1e-13)")
    p.add_argument("--f-ext", choices=sorted(F_EXT_NAMES), default=None,
                   help="source outside the true domain: analytic or P1 interpolant")
    p.add_argument("--solver", choices=("auto", "direct", "dense", "cg", "gmres"), default=None)
    p.add_argument("--reference", choices=REFERENCES, default=None,
                   help="volume errors against the exact solution (default) or its interpolant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvefem", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="JSON file with default flag values")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a disc or annulus mesh")
    _add_domain(p)
    p.add_argument("--M", type=int, default=None, help="mesh size parameter")
    p.add_argument("--segs", type=int, default=None, help="boundary segments (outer circle)")
    p.add_argument("--inner-segs", type=int, default=None, help="annulus inner circle segments")
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("solve", help="solve once and print the error triple")
    _add_domain(p)
    _add_method(p)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--segs", type=int, default=None)
    p.add_argument("--inner-segs", type=int, default=None)
    p.add_argument("--export-field", type=Path, default=None, help="CSV of the vertex error field")
    p.add_argument("--dump-matrix", type=Path, default=None, help="write the system matrix as 'i j value'")

    p = sub.add_parser("sweep", help="convergence table over a list of M")
    _add_domain(p)
    _add_method(p)
    p.add_argument("--M", type=int, nargs="+", default=None)
    p.add_argument("--format", choices=("csv", "markdown"), default=None)
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("eps-sweep", help="Robin errors over a list of epsilon values")
    _add_domain(p)
    _add_method(p, eps_list=True)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--format", choices=("csv", "markdown"), default=None)
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("check", help="report the boundary decomposition and the tangency bound beta")
    _add_domain(p, ("disc", "annulus", "tangency"))
    p.add_argument("--M", type=int, default=None)
    return parser


DEFAULTS = {
    "domain": "disc", "radius": 1.0, "inner_radius": 0.5, "method": "robin", "k": 2,
    "eps": 1e-13, "f_ext": "analytic", "solver": "auto", "reference": "exact", "format": "csv",
}


def _merge_config(args) -> None:
    """Fill flags left unset from the config file, then from DEFAULTS."""
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
    given = {k for k, v in vars(args).items() if v is not None}
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if key not in vars(args):
            continue  # keys for other subcommands
        if key not in given:
            setattr(args, key, value)
            given.add(key)
    for key, value in DEFAULTS.items():
        if getattr(args, key, "absent") is None:
            if key == "eps" and args.command == "eps-sweep":
                continue
            setattr(args, key, value)
    args.given = given


def _validate(args) -> None:
    if getattr(args, "M", None) is None:
        raise UsageError("the following arguments are required: --M")
    Ms = args.M if isinstance(args.M, list) else [args.M]
    if any(int(m) < 1 for m in Ms):
        raise UsageError("--M must be positive")
    method = getattr(args, "method", None)
    if method is not None:
        if method not in METHOD_NAMES:
            raise UsageError(f"unknown method {method!r}")
        if "gamma" in args.given and method in ("robin", "plain"):
            raise UsageError(f"--gamma does not apply to --method {method}")
        if "eps" in args.given and method not in ("robin",):
            raise UsageError(f"--eps does not apply to --method {method}")
        if not 1 <= int(args.k) <= 5:
            raise UsageError("--k must be in 1..5")
    if args.command == "eps-sweep":
        if isinstance(args.eps, (int, float)):
            args.eps = [args.eps]
        if not args.eps:
            raise UsageError("the following arguments are required: --eps")
        if any(float(e) < 0 for e in args.eps):
            raise UsageError("--eps values must be non-negative")


# ---------------------------------------------------------------- commands

def _mesh(args):
    M = int(args.M)
    if args.domain == "disc":
        segs = args.segs or 5 * M
        return build_disc_mesh(M, segs, args.radius)
    outer = args.segs or 4 * M
    inner = args.inner_segs or 2 * M
    return build_annulus_mesh(M, outer, inner, args.inner_radius, args.radius)


def _method_config(args, epsilon=None) -> MethodConfig:
    return MethodConfig(
        method=METHOD_NAMES[args.method], k=int(args.k),
        gamma=100.0 if args.gamma is None else float(args.gamma),
        epsilon=float(args.eps if epsilon is None else epsilon),
        f_extension=F_EXT_NAMES[args.f_ext],
    )


def cmd_mesh(args, out) -> None:
    mesh = _mesh(args)
    path = args.output or _out_path(f"{args.domain}_M{args.M}.mesh")
    write_mesh(mesh, path)
    st = mesh_stats(mesh)
    print(f"wrote {path}", file=out)
    print(f"vertices {mesh.n_vertices}  triangles {mesh.n_triangles}  boundary segments {st.n_boundary_segments}",
          file=out)
    print(f"hmax {_fmt(st.hmax)}  hmin {_fmt(st.hmin)}  min angle {_fmt(st.min_angle)} rad", file=out)


def cmd_solve(args, out) -> None:
    mesh = _mesh(args)
    geometry = make_geometry(args.domain, args.radius, args.inner_radius)
    config = _method_config(args)
    sol = solve_problem(mesh, geometry, config, args.solver)
    l2, h1, bd = error_norms(sol.u_h, sol.u_I, geometry, sol.assembler, args.reference)
    info = sol.info
    print(f"method {args.method}  k {config.k}  M {args.M}  hmax {_fmt(mesh.hmax)}  dofs {info['n']}", file=out)
    kind = "symmetric" if info["symmetric"] else "nonsymmetric"
    print(f"solver {info['solver']} ({kind} system)  relative residual {_fmt(info['residual'])}", file=out)
    print(f"L2 error {_fmt(l2)}", file=out)
    print(f"H1 error {_fmt(h1)}", file=out)
    print(f"bdry error {_fmt(bd)}", file=out)
    if args.export_field is not None:
        export_error_field(sol.u_h, sol.u_I, args.export_field)
        print(f"wrote {args.export_field}", file=out)
    if args.dump_matrix is not None:
        write_coo(sol.system.matrix, args.dump_matrix)
        print(f"wrote {args.dump_matrix}", file=out)


def _emit_table(records, args, out, with_eps=False) -> None:
    text = (records_to_markdown(records, with_eps) if args.format == "markdown"
            else records_to_csv(records, with_eps))
    if args.output is not None:
        Path(args.output).write_text(text)
    out.write(text)


def _sweep_config(args, Ms) -> SweepConfig:
    return SweepConfig(_method_config(args), args.domain, tuple(int(m) for m in Ms),
                       args.radius, args.inner_radius, args.solver, args.reference)


def cmd_sweep(args, out) -> None:
    Ms = sorted(set(int(m) for m in args.M))
    progress = (lambda r: logger.info("M=%d done", r.M)) if args.verbose else None
    _emit_table(run_sweep(_sweep_config(args, Ms), progress), args, out)


def cmd_eps_sweep(args, out) -> None:
    epsilons = [float(e) for e in args.eps]
    args.eps = epsilons[0]
    records = run_eps_sweep(_sweep_config(args, [args.M]), int(args.M), epsilons)
    _emit_table(records, args, out, with_eps=True)


def _check_mesh(args, M):
    if args.domain == "tangency":
        return build_cubic_fixture_mesh(2 * M), CubicGraph()
    return _mesh(argparse.Namespace(**{**vars(args), "M": M, "segs": None, "inner_segs": None})), \
        make_geometry(args.domain, args.radius, args.inner_radius)


def cmd_check(args, out) -> int:
    M = int(args.M)
    mesh, geometry = _check_mesh(args, M)
    dec = classify_boundary(mesh, geometry)
    print(f"boundary edges: Gamma+ {len(dec.gamma_plus)}  Gamma- {len(dec.gamma_minus)}  "
          f"Gamma0 {len(dec.gamma_zero)}", file=out)
    betas = [check_assumption1(*_check_mesh(args, M * 2 ** i)) for i in range(CHECK_LEVELS)]
    levels = "  ".join(f"M={M * 2 ** i}: {_fmt(b)}" for i, b in enumerate(betas))
    print(f"beta under refinement: {levels}", file=out)
    if not all(np.isfinite(betas)):
        verdict = "FAIL"
    elif max(betas) == 0:
        verdict = "PASS"  # no curved edges
    else:
        verdict = "PASS" if max(betas) <= BETA_GROWTH * min(betas) else "FAIL"
    print(f"Assumption 1: β={_fmt(betas[0])}, {verdict}", file=out)
    return 0


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "sweep": cmd_sweep,
            "eps-sweep": cmd_eps_sweep, "check": cmd_check}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _merge_config(args)
        _validate(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    try:
        COMMANDS[args.command](args, out)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"curvefem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
