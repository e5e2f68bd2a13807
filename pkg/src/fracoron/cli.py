"""Command-line front end.

Every command writes `<command>.json` (and `<command>.csv` for tabular
results) into --output-dir and prints the report on stdout. Exit codes:
0 success, 1 verification failure, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import discrete as dsc
from . import estimates as est
from .bubbles import Bubble, bubble_field
from .core import AnnulusDomain, FitDomainError, FracoronError, FracParams, QuadratureConfig, c_ns, c_ns_closed_form
from .quadrature import gagliardo_sq, lp_integral, rayleigh, sobolev_constant

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("constant", "bubble", "prop1", "prop2", "gap", "solve", "identities")


class UsageError(Exception):
    pass


# ------------------------------------------------------------ formatting

def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """Deterministic JSON: insertion key order, 17 significant digits, null for non-finite."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f'"{k}": {to_json(v)}' for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(command: str, columns: list[str], rows) -> str:
    lines = [f"# fracoron v1, command={command}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt_float(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str, path) -> None:
    """Write a report dict (json) or a (command, columns, rows) triple (csv)."""
    text = to_json(report) + "\n" if fmt == "json" else to_csv(*report)
    try:
        Path(path).write_text(text)
    except OSError as err:
        raise OSError(f"cannot write report to {path}: {err}") from err


# ------------------------------------------------------------ arguments

def _point(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad point {text!r}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--config", help="key = value file; explicit flags win")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--format", choices=("csv", "json"), default="json",
                   help="stdout format")
    p.add_argument("--json", action="store_true", help="same as --format json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rel-tol", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracoron", description="Fractional critical problems on annuli.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constant", help="normalizing constant C(N, s)")
    _common(p)

    p = sub.add_parser("bubble", help="Rayleigh quotient of a bubble")
    _common(p)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--z", type=_point, default=None)

    for name, what in (("prop1", "energy excess"), ("prop2", "norm deficit")):
        p = sub.add_parser(name, help=f"{what} of truncated bubbles over a delta sweep")
        _common(p)
        p.add_argument("--eps", type=float, default=0.05)
        p.add_argument("--delta-sweep", type=int, default=4, help="delta = eps / 2^k, k = n..1")
        p.add_argument("--z", type=_point, default=None)

    p = sub.add_parser("gap", help="Rayleigh gap of the test family")
    _common(p)
    p.add_argument("--epsbar", type=float, default=0.05)
    p.add_argument("--samples", type=int, default=16)
    p.add_argument("--varpi", type=float, default=est.DEFAULT_VARPI)

    p = sub.add_parser("solve", help="min-max solve on an annulus")
    _common(p)
    p.add_argument("--r1", type=float, default=0.1)
    p.add_argument("--r2", type=float, default=4.0)
    p.add_argument("--center", type=_point, default=None)
    p.add_argument("--res", type=int, default=48)
    p.add_argument("--epsbar", type=float, default=0.05)
    p.add_argument("--policy", choices=dsc.POLICIES, default="galerkin")
    p.add_argument("--rings", type=int, default=3)
    p.add_argument("--angles", type=int, default=16)

    p = sub.add_parser("identities", help="algebraic identities and gradient oracle of the grid scheme")
    _common(p)
    p.add_argument("--r1", type=float, default=0.1)
    p.add_argument("--r2", type=float, default=4.0)
    p.add_argument("--res", type=int, default=24)
    p.add_argument("--policy", choices=dsc.POLICIES, default="galerkin")
    return ap


def read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}")
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        for k, v in conf.items():
            if k not in known or k in ("help", "config"):
                raise UsageError(f"unknown config key {k!r}")
            if known[k].nargs == 0:
                conf[k] = v.lower() in ("1", "true", "yes")
        # string defaults go through the flag's type; explicit flags then win
        sub.set_defaults(**conf)
        args = ap.parse_args(argv)
    if args.json:
        args.format = "json"
    raw = os.environ.get("FRACORON_THREADS")
    if raw is not None:
        try:
            if int(raw) < 1:
                raise ValueError
        except ValueError:
            raise UsageError("FRACORON_THREADS must be an integer >= 1")
    return args


# ------------------------------------------------------------ commands

def _params(args) -> FracParams:
    return FracParams(args.dim, args.s)


def _z(args, dim):
    z = (0.0,) * dim if args.z is None else args.z
    if len(z) != dim:
        raise UsageError(f"--z needs {dim} coordinates")
    return z


def cmd_constant(args):
    params = _params(args)
    q = QuadratureConfig(rel_tol=min(args.rel_tol, 1e-8))
    c = c_ns(params, q)
    ref = c_ns_closed_form(params)
    rep = {"C": c, "rel_err": abs(c - ref) / ref}
    return rep, None, rep["rel_err"] <= 1e-6


def cmd_bubble(args):
    params = _params(args)
    q = QuadratureConfig(rel_tol=args.rel_tol)
    U = bubble_field(Bubble(args.eps, _z(args, params.dim)), params)
    S = sobolev_constant(params)
    R = rayleigh(U, params, q)
    rep = {"eps": args.eps, "z": list(_z(args, params.dim)), "gagliardo_sq": gagliardo_sq(U, params, q),
           "lp_integral": lp_integral(U, params.p_crit, params, q), "rayleigh": R, "S": S,
           "rel_err": abs(R - S) / S}
    return rep, None, rep["rel_err"] <= 10 * args.rel_tol


def _sweep_command(args, name, sweep_fn, fit_kw, check):
    params = _params(args)
    q = QuadratureConfig(rel_tol=args.rel_tol)
    z = _z(args, params.dim)
    if args.delta_sweep < 4:
        raise UsageError("--delta-sweep needs at least 4 points")
    sweep = sweep_fn(args.eps, z, params, args.delta_sweep, q)
    column = "excess" if name == "prop1" else "deficit"
    table = (name, ["delta", column], [(float(d), float(v)) for d, v in sweep])
    try:
        fit = est.fit_scaling(sweep, **fit_kw).as_dict()
        ok = check(fit, sweep)
    except FitDomainError as err:
        fit = {"fitted_slope": None, "r_squared": None, "error": str(err),
               "sweep": [[x, y] for x, y in sweep]}
        ok = False
    rep = {"command": name, "dim": params.dim, "s": params.s, "eps": args.eps, "z": list(z),
           "report": fit, "passes": ok}
    return rep, table, ok


def cmd_prop1(args):
    slope_min = 0.8 * (args.dim - 2 * args.s)
    return _sweep_command(args, "prop1", est.excess_sweep, {"subtract_baseline": True},
                          lambda f, sw: f["fitted_slope"] >= slope_min and f["r_squared"] >= 0.9)


def cmd_prop2(args):
    return _sweep_command(args, "prop2", est.deficit_sweep, {},
                          lambda f, sw: abs(f["fitted_slope"] - args.dim) <= 0.15 * args.dim
                          and all(y >= 0 for _, y in sw))


def cmd_gap(args):
    params = _params(args)
    q = QuadratureConfig(rel_tol=args.rel_tol)
    zs = est.ball_samples(args.samples, params.dim, args.seed)
    res = est.rayleigh_gap(args.epsbar, zs, params, q, args.varpi)
    rows = [tuple(float(c) for c in z) + (v,) for z, v in zip(zs, res.quotients)]
    cols = [f"z{i}" for i in range(params.dim)] + ["quotient"]
    rep = {"eps_bar": args.epsbar, "varpi": args.varpi, "max_quotient": res.max_quotient,
           "threshold": res.threshold, "reference_s": res.reference_s, "passes": res.passes}
    return rep, ("gap", cols, rows), res.passes


def _annulus(args, dim):
    c = getattr(args, "center", None) or (0.0,) * dim
    if len(c) != dim:
        raise UsageError(f"--center needs {dim} coordinates")
    return AnnulusDomain(c, args.r1, args.r2)


def cmd_solve(args, out_dir):
    params = _params(args)
    dom = _annulus(args, params.dim)
    cfg = dsc.MinMaxConfig(rings=args.rings, angles=args.angles, policy=args.policy)
    t0 = time.perf_counter()
    rep, u = dsc.minmax_solve(dom, args.res, args.epsbar, params, cfg)
    d = rep.as_dict()
    d["seconds"] = time.perf_counter() - t0
    dsc.write_field(out_dir / "solve_field.txt", u, params)
    return d, None, rep.window_ok and rep.positivity_ok


def cmd_identities(args):
    params = _params(args)
    ndom, _ = dsc.normalized_domain(_annulus(args, params.dim))
    form = dsc.assemble_form(ndom, args.res, params, args.policy)
    checks = dsc.identity_suite(form, args.seed)
    grads = dsc.gradient_check(form, args.seed)
    for k, v in grads.items():
        checks[k] = {"value": v, "tol": 1e-5, "ok": bool(v <= 1e-5)}
    rows = [(k, c["value"], c["tol"], str(c["ok"]).lower()) for k, c in checks.items()]
    return checks, ("identities", ["check", "value", "tol", "ok"], rows), all(c["ok"] for c in checks.values())


def _dispatch(args, out_dir):
    if args.command == "solve":
        return cmd_solve(args, out_dir)
    return globals()[f"cmd_{args.command}"](args)


def _stdout(command, rep, table, fmt):
    if fmt == "csv" and table is not None:
        return to_csv(*table)
    if fmt == "csv":
        flat = {k: v for k, v in rep.items() if not isinstance(v, (dict, list, tuple))}
        return to_csv(command, list(flat), [list(flat.values())])
    return to_json(rep) + "\n"


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        try:
            args = parse(argv)
        except SystemExit as ex:
            return EXIT_OK if ex.code == 0 else EXIT_USAGE
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rep, table, ok = _dispatch(args, out_dir)
        emit_report(rep, "json", out_dir / f"{args.command}.json")
        if table is not None:
            emit_report(table, "csv", out_dir / f"{args.command}.csv")
        sys.stdout.write(_stdout(args.command, rep, table, args.format))
        return EXIT_OK if ok else EXIT_FAIL
    except (UsageError, ValueError, OSError) as err:
        print(f"fracoron: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FracoronError, ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"fracoron: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())
