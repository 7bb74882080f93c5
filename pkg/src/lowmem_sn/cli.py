"""Command-line front end: single solves, convergence tables, epsilon sweeps and checks."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .benchmarks import (
    CASE_IDS,
    Profile,
    get_case,
    l1_error,
    reference_solution,
    relative_profile_error,
    run_convergence_study,
    run_profile,
)
from .checks import CHECKS, run_checks
from .diffusion import solve_diffusion_limit
from .mesh import SpaceKind
from .schemes import solve

SCHEMES = tuple(k.value for k in SpaceKind)
DEFAULT_EPS_SWEEP = {"ex42": [1.0, 1e-2, 1e-4, 1e-5], "ex47": [1.0, 2.0**-6, 2.0**-10, 2.0**-14]}


def parse_suppression(text: str):
    """``auto``, ``none`` or ``faces=AXIS:COORD[;AXIS:COORD...]``."""
    if text in ("auto", "none"):
        return text
    if not text.startswith("faces="):
        raise argparse.ArgumentTypeError(f"bad suppression {text!r}")
    faces = []
    for item in text[len("faces="):].split(";"):
        axis, coord = item.split(":")
        faces.append((int(axis), float(coord)))
    return faces


def parse_cells(text: str) -> int | tuple[int, ...]:
    parts = [int(v) for v in str(text).split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",")]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with defaults for any option")
    common.add_argument("--case", choices=CASE_IDS, default="ex41_iso")
    common.add_argument("--eps", type=float, help="scaling parameter (ex42, ex47)")
    common.add_argument("--sigma-s2", type=float, default=10000.0, help="right-half scattering for ex43")
    common.add_argument("--anisotropy", type=float, default=3.0, help="k in (Omega_x - k Omega_y)^2 for ex46_aniso")
    common.add_argument("--ordinates", type=int, help="number of ordinates (2 p^2 in 2D)")
    common.add_argument("--stencil", choices=("two", "three"), default="two")
    common.add_argument("--suppress", type=parse_suppression, default="auto",
                        help="auto, none, or faces=AXIS:COORD;AXIS:COORD")
    common.add_argument("--tol", type=float, help="relative GMRES tolerance (default: attainable for eps)")
    common.add_argument("--max-iter", type=int, default=20000)
    common.add_argument("--restart", type=int, help="GMRES restart length (default: unrestarted)")
    common.add_argument("--out", type=Path, default=Path("out"))

    p = argparse.ArgumentParser(prog="lowmem-sn", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="one solve: profile CSV, metadata, iteration log")
    s.add_argument("--scheme", choices=SCHEMES, default="lm")
    s.add_argument("--cells", type=parse_cells, help="mesh parameter, N or N,M")
    s.add_argument("--reference", action="store_true", help="also solve the case's fine reference")

    c = sub.add_parser("convergence", parents=[common], help="error table over the mesh ladder")
    c.add_argument("--schemes", type=lambda t: t.split(","), help="comma-separated subset")
    c.add_argument("--ladder", type=lambda t: [parse_cells(v) for v in t.split("/")],
                   help="mesh parameters separated by '/', e.g. 20/40/80")

    d = sub.add_parser("difflimit", parents=[common], help="epsilon sweep against reference and diffusion limit")
    d.add_argument("--schemes", type=lambda t: t.split(","), help="comma-separated subset")
    d.add_argument("--cells", type=parse_cells, help="mesh parameter, N or N,M")
    d.add_argument("--eps-list", type=_float_list, help="comma-separated epsilons")

    k = sub.add_parser("checks", help="structural property batch")
    k.add_argument("--only", type=lambda t: t.split(","), help=f"subset of {','.join(CHECKS)}")
    k.add_argument("--out", type=Path, default=Path("out"))
    p.subcommands = {"solve": s, "convergence": c, "difflimit": d, "checks": k}
    return p


def _apply_config(parser, argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` replace defaults but not explicit flags."""
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path is None:
        return args
    with open(path, "rb") as fh:
        data = {k.replace("-", "_"): v for k, v in tomllib.load(fh).items()}
    for key in data:
        if not hasattr(args, key):
            parser.error(f"unknown config key {key!r}")
    # string defaults go through each option's type converter on reparse
    numeric = {k: str(v) for k, v in data.items() if isinstance(v, (int, float)) and not isinstance(v, bool)}
    parser.subcommands[args.command].set_defaults(**{**data, **numeric})
    return parser.parse_args(argv)


def _case(args, eps=None):
    return get_case(args.case, eps=eps if eps is not None else args.eps, sigma_s2=args.sigma_s2,
                    anisotropy=args.anisotropy, ordinates=args.ordinates)


def _config(args, case):
    over = {"max_iter": args.max_iter, "restart": args.restart}
    if args.tol is not None:
        over["tol"] = args.tol
    return case.config(**over)


def _metadata(args, case, **extra) -> dict:
    opts = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    return {"version": __version__, "options": opts, "case": case.describe(), **extra}


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def cmd_solve(args) -> int:
    case = _case(args)
    config = _config(args, case)
    n = args.cells if args.cells is not None else (case.profile_cells or case.ladder)[0]
    mesh = case.make_mesh(n)
    log = []
    sol = solve(args.scheme, case.problem, mesh, case.quad, config, args.stencil, args.suppress,
                log=lambda it, res: log.append((it, res)))
    prof = Profile(case.id, mesh.centers.copy(), {args.scheme: sol.evaluate_scalar(mesh.centers)}, {args.scheme: sol})
    extra = {"iterations": sol.iterations, "residual": sol.residual, "mesh": mesh.describe(), "gmres": asdict(config)}
    if args.reference and case.reference_mesh:
        ref = reference_solution(case, config)
        prof.values["reference"] = ref.evaluate_scalar(prof.centers)
        extra["relative_l1_to_reference"] = relative_profile_error(sol, ref)
    if case.exact is not None:
        extra["l1_error"] = l1_error(sol, case.policy, case.exact)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = f"{case.id}_{args.scheme}"
    prof.to_csv(args.out / f"{stem}_profile.csv")
    with open(args.out / f"{stem}_iterations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_residual"])
        w.writerows([(i, f"{r:.6e}") for i, r in log])
    _write_json(args.out / f"{stem}_meta.json", _metadata(args, case, **extra))
    print(f"{case.id} {args.scheme}: {sol.iterations} GMRES iterations, residual {sol.residual:.2e}")
    for key in ("l1_error", "relative_l1_to_reference"):
        if key in extra:
            print(f"  {key} = {extra[key]:.4e}")
    print(f"  wrote {args.out / (stem + '_profile.csv')}")
    return 0


def cmd_convergence(args) -> int:
    case = _case(args)
    config = _config(args, case)
    t0 = time.perf_counter()
    rep = run_convergence_study(case, args.schemes, args.ladder, config, args.stencil)
    args.out.mkdir(parents=True, exist_ok=True)
    rep.to_csv(args.out / f"{case.id}_convergence.csv")
    _write_json(args.out / f"{case.id}_convergence_meta.json",
                _metadata(args, case, gmres=asdict(config), seconds=round(time.perf_counter() - t0, 1)))
    print(f"{'scheme':<6} {'h':>11} {'cells':>6} {'error':>10} {'order':>6} {'iters':>6}")
    for r in rep.rows:
        order = "" if math.isnan(r.order) else f"{r.order:.2f}"
        print(f"{r.scheme:<6} {r.label:>11} {r.cells:>6} {r.error:>10.3e} {order:>6} {r.iterations:>6} {'' if r.status == 'ok' else r.status}")
    return 0 if all(r.status == "ok" for r in rep.rows) else 1


def cmd_difflimit(args) -> int:
    if args.case not in DEFAULT_EPS_SWEEP:
        raise SystemExit(f"difflimit supports {', '.join(DEFAULT_EPS_SWEEP)}")
    eps_list = args.eps_list or DEFAULT_EPS_SWEEP[args.case]
    rows = []
    for eps in eps_list:
        case = _case(args, eps)
        config = _config(args, case)
        n = args.cells if args.cells is not None else (case.profile_cells or case.ladder)[0]
        mesh = case.make_mesh(n)
        ref = reference_solution(case, config)
        limit = solve_diffusion_limit("cg", case.problem, case.make_mesh(case.reference_mesh))
        for scheme in args.schemes or case.schemes:
            prof = run_profile(case, [scheme], n, config, args.stencil, args.suppress, with_reference=False)
            sol = prof.solutions[scheme]
            pts = mesh.centers
            lim = limit.evaluate(pts)
            dist = float(np.abs(sol.evaluate_scalar(pts) - lim).sum() / np.abs(lim).sum())
            rows.append((eps, scheme, mesh.n_cells, relative_profile_error(sol, ref), dist, sol.iterations))
            print(f"eps={eps:.3e} {scheme:<4} rel_L1_ref={rows[-1][3]:.3e} rel_to_limit={dist:.3e} iters={sol.iterations}")
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / f"{args.case}_difflimit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "scheme", "cells", "rel_l1_reference", "rel_l1_diffusion_limit", "iterations"])
        for e, s, c, a, b, i in rows:
            w.writerow([f"{e:.6e}", s, c, f"{a:.6e}", f"{b:.6e}", i])
    _write_json(args.out / f"{args.case}_difflimit_meta.json", _metadata(args, _case(args, eps_list[-1]), eps_list=eps_list))
    return 0


def cmd_checks(args) -> int:
    results = run_checks(args.only)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "checks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "passed", "value", "tol", "detail"])
        for r in results:
            w.writerow([r.name, r.passed, f"{r.value:.6e}", f"{r.tol:.1e}", r.detail])
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "difflimit": cmd_difflimit, "checks": cmd_checks}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
