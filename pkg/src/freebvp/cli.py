"""Command-line entry point: ``freebvp {solve,sweep,refine,bench,list}``.

Exit status is 0 on success, 1 when a solver fails or a benchmark cell does
not pass, and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .bench import EXPERIMENTS, HEADER as BENCH_HEADER, run_experiment
from .errors import SolverError
from .fbf import formulate, normalize
from .integrate import IvpOptions
from .kellerbox import DEFAULT_NEWTON as BOX_NEWTON
from .kellerbox import BoxMesh, refinement_study, solve_box
from .problems import BUILTIN_NAMES, builtin, parameter_names
from .shoot import DEFAULT_NEWTON as SHOOT_NEWTON
from .shoot import default_guess, solve_shoot
from .sweep import default_solver, run_sweep
from .tables import to_csv, to_table

__all__ = ["main", "build_parser"]

log = logging.getLogger("freebvp")


class UsageError(Exception):
    pass


def _eps_ladder(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eps-ladder: not a comma list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("--eps-ladder: empty list")
    return values


def _problem_args(p):
    p.add_argument("--problem", required=True, choices=BUILTIN_NAMES, metavar="NAME",
                   help="one of: " + ", ".join(BUILTIN_NAMES))
    for name in ("P", "P1", "P2", "P3"):
        p.add_argument(f"--{name}", type=float, help=f"problem parameter {name}")


def _solver_args(p, grid=True):
    p.add_argument("--solver", choices=("shoot", "box"))
    if grid:
        p.add_argument("--grid", type=int, default=1000, metavar="J",
                       help="box intervals (J+1 nodes), default 1000")
    p.add_argument("--rtol", type=float, help="integrator relative tolerance")
    p.add_argument("--atol", type=float, help="integrator absolute tolerance")
    p.add_argument("--newton-tol", type=float, help="Newton residual tolerance")
    p.add_argument("--max-iters", type=int, help="Newton iteration cap")


def _output_args(p):
    p.add_argument("--out", metavar="PATH", help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "table"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="freebvp",
        description="Free boundary solvers for BVPs on semi-infinite intervals.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log Newton progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one free boundary problem")
    _problem_args(p)
    p.add_argument("--eps", type=float, required=True)
    _solver_args(p)
    _output_args(p)

    p = sub.add_parser("sweep", help="continuation along an eps ladder")
    _problem_args(p)
    p.add_argument("--eps-ladder", type=_eps_ladder, metavar="E1,E2,...")
    _solver_args(p)
    _output_args(p)

    p = sub.add_parser("refine", help="box-scheme mesh refinement study")
    _problem_args(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--M", type=int, default=125)
    p.add_argument("--kmax", type=int, default=7)
    _solver_args(p, grid=False)
    _output_args(p)

    p = sub.add_parser("bench", help="reproduce the reference tables")
    p.add_argument("names", nargs="*", metavar="EXPERIMENT",
                   help="default: all of " + ", ".join(EXPERIMENTS))
    _output_args(p)

    sub.add_parser("list", help="list problems and experiments")
    return parser


def _spec(args):
    accepted = parameter_names(args.problem)
    params = {}
    for name in ("P", "P1", "P2", "P3"):
        value = getattr(args, name)
        if value is None:
            continue
        if name not in accepted:
            raise UsageError(f"--{name}: problem {args.problem} takes {', '.join(accepted) or 'no parameters'}")
        params[name] = value
    try:
        return builtin(args.problem, params)[0]
    except ValueError as exc:
        raise UsageError(f"--problem {args.problem}: {exc}") from exc


def _options(args, solver):
    base = SHOOT_NEWTON if solver == "shoot" else BOX_NEWTON
    kw = {}
    if args.newton_tol is not None:
        kw["residual_tol"] = args.newton_tol
    if args.max_iters is not None:
        kw["max_iters"] = args.max_iters
    ivp_kw = {}
    if args.rtol is not None:
        ivp_kw["rel_tol"] = args.rtol
    if args.atol is not None:
        ivp_kw["abs_tol"] = args.atol
    try:
        newton = dataclasses.replace(base, **kw)
        ivp = IvpOptions(**ivp_kw)
    except ValueError as exc:
        raise UsageError(f"--newton-tol/--max-iters/--rtol/--atol: {exc}") from exc
    return newton, ivp


def _grid_nodes(args):
    if args.grid < 2:
        raise UsageError("--grid: need at least 2 intervals")
    return args.grid + 1


def _ic_columns(spec, where="0"):
    return [f"d{k}u_dx{k}_at_{where}" for k in spec.unknown_left_indices]


def _sweep_header(spec):
    return ["eps", "x_eps", *_ic_columns(spec), "residual_norm", "iterations"]


def _emit(args, header, rows):
    text = to_csv(header, rows) if args.format == "csv" else to_table(header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args):
    spec = _spec(args)
    solver = args.solver or default_solver(spec)
    newton, ivp = _options(args, solver)
    try:
        nb = normalize(formulate(spec, args.eps))
    except ValueError as exc:
        raise UsageError(f"--eps: {exc}") from exc
    if solver == "shoot":
        grid = solve_shoot(nb, default_guess(spec, args.eps), newton, ivp)
    else:
        grid = solve_box(nb, BoxMesh(_grid_nodes(args)), None, newton)
    row = [args.eps, grid.x_eps, *(grid.missing_ic[k] for k in spec.unknown_left_indices),
           grid.residual_norm, grid.iterations]
    _emit(args, _sweep_header(spec), [row])
    if grid.monotone_ok is False:
        print("warning: controlled derivative is not monotone on the grid", file=sys.stderr)
    return 0


def _cmd_sweep(args):
    spec = _spec(args)
    solver = args.solver or default_solver(spec)
    newton, ivp = _options(args, solver)
    try:
        report = run_sweep(spec, args.eps_ladder, solver, newton, ivp, grid=_grid_nodes(args))
    except ValueError as exc:
        raise UsageError(f"--eps-ladder: {exc}") from exc
    rows = []
    for r in report.rows:
        ics = [r.missing_ic.get(k) for k in spec.unknown_left_indices]
        rows.append([r.eps, r.x_eps, *ics, r.residual_norm, r.iterations])
    _emit(args, _sweep_header(spec), rows)
    for r in report.rows:
        if not r.ok:
            print(f"row eps={r.eps!r} failed: {r.error}", file=sys.stderr)
    if len(report.successful) >= 2:
        verdict = "OK" if report.golden_rule_ok else f"VIOLATED {report.violations}"
        print(f"golden rule: {verdict}", file=sys.stderr)
    if report.order_fit is not None:
        fit = report.order_fit
        print(f"order fit: slope={fit.slope!r} L_fit={fit.L_fit!r} points={len(fit.points)}",
              file=sys.stderr)
    if report.digits:
        print("agreeing digits (last two rows): "
              + ", ".join(f"d{k}u(0)={d}" for k, d in report.digits.items()), file=sys.stderr)
    return 0 if all(r.ok for r in report.rows) else 1


def _cmd_refine(args):
    spec = _spec(args)
    if args.solver == "shoot":
        raise UsageError("--solver: a refinement study requires the box solver")
    if args.M < 2:
        raise UsageError("--M: must be at least 2")
    if args.kmax < 0:
        raise UsageError("--kmax: must be non-negative")
    newton, _ = _options(args, "box")
    try:
        nb = normalize(formulate(spec, args.eps))
    except ValueError as exc:
        raise UsageError(f"--eps: {exc}") from exc
    study = refinement_study(nb, args.M, args.kmax, newton)
    n = spec.order
    header = ["nodes", "x_eps", *_ic_columns(spec),
              *(f"d{k}u_dx{k}_at_x_eps" for k in range(n)), "residual_norm", "iterations"]
    rows = [
        [r.node_count, r.x_eps, *(r.missing_ic[k] for k in spec.unknown_left_indices),
         *(float(v) for v in r.terminal), r.residual_norm, r.iterations]
        for r in study.rows
    ]
    _emit(args, header, rows)
    return 0


def _cmd_bench(args):
    names = args.names or list(EXPERIMENTS)
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        raise UsageError(
            f"unknown experiment {unknown[0]!r}; valid names: {', '.join(EXPERIMENTS)}"
        )
    comparisons = [run_experiment(n) for n in names]
    rows = [row for comp in comparisons for row in comp.rows()]
    _emit(args, BENCH_HEADER, rows)
    for comp in comparisons:
        status = "pass" if comp.passed else "FAIL"
        print(f"{comp.experiment.name}: {status}", file=sys.stderr)
    return 0 if all(c.passed for c in comparisons) else 1


def _cmd_list(args):
    for name in BUILTIN_NAMES:
        params = ", ".join(parameter_names(name)) or "-"
        print(f"problem     {name:<20} params: {params}")
    for name, exp in EXPERIMENTS.items():
        print(f"experiment  {name:<24} {exp.description}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "refine": _cmd_refine,
    "bench": _cmd_bench,
    "list": _cmd_list,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"freebvp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"freebvp {args.command}: solver failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
