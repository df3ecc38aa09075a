"""Command-line entry point: ``abflux <command> ...``.

Exit status is 0 on success, 2 when the mathematics rules the request out
(a target that is not attainable, data outside a flux branch, a failed
construction) and 1 on usage errors (bad flags, missing or malformed files).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .attainability import ToleranceSet, check_membership
from .controller import BracketFailure, NotConstructible, reconstruct_field, roundtrip_error, steer
from .fileio import (
    ParseError,
    _load_json,
    connection_from_spec,
    dumps,
    flux_from_spec,
    parse_profile,
    profile_from_dict,
    write_field_csv,
    write_json,
    write_profile_csv,
)
from .flux import FluxError
from .optimize import AdmissibleSet, fuel_problem, l2_problem, optimize
from .profile import Profile
from .riemann import classify_trace_pair, interface_traces
from .solver import evolve, make_grid

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _positive(value: str) -> float:
    v = float(value)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return v


def _emit(obj):
    print(dumps(obj))


def _negated(p: Profile) -> Profile:
    return Profile(tuple((a, b, -u, -v) for a, b, u, v in p.pieces), -p.left_tail, -p.right_tail)


def _model(args):
    pair, adapter = flux_from_spec(args.flux, str(args.flux))
    conn = connection_from_spec(args.conn, pair, str(args.conn))
    return pair, adapter, conn


def _grid(args):
    return make_grid(args.x_min, args.x_max, args.cells)


def _tolerances(args, grid):
    if args.tol is not None:
        return ToleranceSet(*(args.tol,) * 5)
    return ToleranceSet.scaled(grid.dx) if args.grid_tolerances else None


# ---------------------------------------------------------------------------
# commands


def cmd_riemann(args) -> int:
    pair, _, conn = _model(args)
    tp = interface_traces(pair, conn, args.a, args.b)
    _emit({"F": tp.flux, "u_l": tp.u_l, "u_r": tp.u_r, "class": classify_trace_pair(pair, conn, tp)})
    return EXIT_OK


def cmd_solve(args) -> int:
    pair, _, conn = _model(args)
    u0 = parse_profile(args.u0)
    grid = _grid(args)
    fld = evolve(u0, args.T, pair, conn, grid, cfl=args.cfl, n_out=args.n_out)
    out = {"summary": fld.summary()}
    if args.out:
        files = {
            "field_csv": str(write_field_csv(args.out / "field.csv", fld)),
            "summary_json": str(write_json(args.out / "summary.json", fld.summary())),
            "final_profile_json": str(write_json(args.out / "final_profile.json", fld.final_profile().to_dict())),
        }
        _emit({"files": files, "diagnostics": fld.diagnostics | {"mass": fld.diagnostics["mass"][-1], "linf": fld.diagnostics["linf"][-1]}})
    else:
        _emit(out)
    return EXIT_OK


def cmd_check(args) -> int:
    pair, _, conn = _model(args)
    omega = parse_profile(args.profile)
    report = check_membership(omega, args.T, pair, conn, _tolerances(args, _grid(args)))
    if args.out:
        write_json(args.out / "report.json", report.to_dict())
    _emit(report.to_dict())
    return EXIT_OK


def _plan(args):
    pair, _, conn = _model(args)
    omega = parse_profile(args.profile)
    grid = _grid(args)
    report = check_membership(omega, args.T, pair, conn, _tolerances(args, grid))
    if not report.member:
        _emit(report.to_dict())
        print("target is not attainable at this time", file=sys.stderr)
        return None, grid
    return steer(omega, args.T, pair, conn, report), grid


def cmd_steer(args) -> int:
    plan, grid = _plan(args)
    if plan is None:
        return EXIT_DOMAIN
    if args.out:
        write_json(args.out / "plan.json", plan.to_dict())
        write_json(args.out / "u0.json", plan.u0.to_dict())
        lo, hi = plan.u0.support
        write_profile_csv(args.out / "u0.csv", plan.u0, min(lo, grid.edges[0]) - 1.0, max(hi, grid.edges[-1]) + 1.0)
        if args.reconstruct:
            write_field_csv(args.out / "field.csv", reconstruct_field(plan, grid, n_out=args.n_out))
    _emit(plan.to_dict())
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    plan, grid = _plan(args)
    if plan is None:
        return EXIT_DOMAIN
    result = roundtrip_error(plan, grid, cfl=args.cfl)
    if args.out:
        write_json(args.out / "roundtrip.json", result)
    _emit(result)
    return EXIT_OK


def _box_rows(rows, source):
    out = []
    for i, r in enumerate(rows):
        if not isinstance(r, list) or len(r) != 4:
            raise ParseError(source, f"G[{i}]", "expected [x0, x1, lo, hi]")
        out.append(((float(r[0]), float(r[1])), (float(r[2]), float(r[3]))))
    return out


def _target(obj, source):
    if isinstance(obj, dict):
        return profile_from_dict(obj, source)
    if isinstance(obj, str):
        return parse_profile(obj)
    raise ParseError(source, "objective.target", "expected a profile object or a file path")


def cmd_optimize(args) -> int:
    source = str(args.problem)
    prob = _load_json(args.problem)
    try:
        pair, adapter = flux_from_spec(prob["flux"], source)
        T = float(prob["T"])
        g = prob["grid"]
        grid = make_grid(float(g["x_min"]), float(g["x_max"]), int(g["cells"]))
        boxes = _box_rows(prob["G"], source)
        support = tuple(prob.get("support", (min(b[0][0] for b in boxes), max(b[0][1] for b in boxes))))
        obj = prob["objective"]
        kind = obj["kind"]
    except KeyError as exc:
        raise ParseError(source, str(exc.args[0]), "missing") from exc
    if adapter is not None:
        # densities in the file, states u = -rho in the solver
        boxes = [(xs, (-hi, -lo)) for xs, (lo, hi) in boxes]
    gamma_range = prob.get("gamma_range")
    adm = AdmissibleSet.from_boxes(boxes, support, pair, m=int(prob.get("cells", 20)), gamma_range=tuple(gamma_range) if gamma_range else None)
    common = {"budget": int(prob.get("budget", 2000)), "seed": int(prob.get("seed", 0)), "restarts": int(prob.get("restarts", 4))}
    window = tuple(obj.get("window", (grid.edges[0], grid.edges[-1])))
    if kind == "l2":
        target = _target(obj.get("target"), source)
        if adapter is not None:
            target = _negated(target)
        problem = l2_problem(pair, adm, target, window, T, grid, **common)
    elif kind == "fuel":
        problem = fuel_problem(pair, adm, obj.get("P", [1.0]), T, grid, window=window, adapter=adapter, n_out=int(obj.get("n_out", 20)), **common)
    else:
        raise ParseError(source, "objective.kind", f"expected 'l2' or 'fuel', got {kind!r}")
    res = optimize(problem)
    best = res.best.profile(adm)
    out = res.to_dict() | {"admissible": adm.to_dict(), "profile": best.to_dict()}
    if adapter is not None:
        out["density_profile"] = _negated(best).to_dict()
        out["interface_level"] = adapter.gamma_to_level(res.best.gamma)
    if args.out:
        write_json(args.out / "result.json", out)
        shown = _negated(best) if adapter is not None else best
        write_profile_csv(args.out / "profile.csv", shown, grid.edges[0], grid.edges[-1])
    _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abflux", description="Conservation laws with a flux jump at x=0 under an interface connection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model(p):
        p.add_argument("--flux", type=_existing, required=True, help="flux pair spec (JSON)")
        p.add_argument("--conn", type=_existing, required=True, help="connection spec (JSON)")

    def domain(p, cells=800):
        p.add_argument("--x-min", type=float, default=-4.0)
        p.add_argument("--x-max", type=float, default=4.0)
        p.add_argument("--cells", type=int, default=cells)

    def target(p):
        p.add_argument("--profile", type=_existing, required=True, help="target profile (JSON or x,u CSV)")
        p.add_argument("--T", type=_positive, required=True)
        p.add_argument("--tol", type=float, default=None, help="one tolerance for every check")
        p.add_argument("--grid-tolerances", action="store_true", help="tolerances scaled to the cell size")

    p = sub.add_parser("riemann", help="interface Riemann problem")
    model(p)
    p.add_argument("--a", type=float, required=True, help="left state")
    p.add_argument("--b", type=float, required=True, help="right state")
    p.set_defaults(func=cmd_riemann)

    p = sub.add_parser("solve", help="Godunov solution from an initial profile")
    model(p)
    domain(p)
    p.add_argument("--u0", type=_existing, required=True)
    p.add_argument("--T", type=_positive, required=True)
    p.add_argument("--cfl", type=_positive, default=0.45)
    p.add_argument("--n-out", type=int, default=10)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="is the profile attainable at time T")
    model(p)
    domain(p)
    target(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("steer", help="initial datum reaching the profile at time T")
    model(p)
    domain(p)
    target(p)
    p.add_argument("--reconstruct", action="store_true", help="also write the field along the characteristics")
    p.add_argument("--n-out", type=int, default=10)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("roundtrip", help="steer, solve forward and report the L1 error at T")
    model(p)
    domain(p, cells=1000)
    target(p)
    p.add_argument("--cfl", type=_positive, default=0.45)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("optimize", help="best initial datum and connection for an objective")
    p.add_argument("--problem", type=_existing, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, NotConstructible, BracketFailure, FluxError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
