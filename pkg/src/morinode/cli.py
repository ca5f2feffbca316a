"""Command-line surface: problem loading, analysis commands, persistence.

Results are JSON documents on stdout; with --out they are also persisted
under out/<command>/<config-hash>.json so long sweeps survive interruption.
Exit codes: 0 success, 2 precondition violation, 64 unknown subcommand,
65 malformed problem file.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fibre as fibre_mod
from . import globalgeo, morin, search
from .core import (Grid, MalformedFileError, MorinodeError, Nonlinearity,
                   PeriodicFn, PreconditionError, FourierAnsatz,
                   ansatz_from_json, ansatz_to_json, load_json, mean,
                   nonlinearity_from_json)
from .odeint import return_map

SCHEMA = "morinode.result/1"

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_USAGE = 64
EXIT_BAD_FILE = 65

COMMANDS = ("sigma", "classify-point", "classify-operator", "fibre",
            "return-map", "count-solutions", "find-singularity", "hull",
            "degree", "tameness", "reparam", "sweep")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, PeriodicFn):
        return {"n": obj.grid.n, "mean": mean(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _config_hash(command: str, config: dict) -> str:
    blob = json.dumps({"command": command, "config": config}, sort_keys=True,
                      separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _emit(command: str, config: dict, result: dict, out_dir: str | None) -> dict:
    payload = {
        "schema": SCHEMA,
        "command": command,
        "config": _jsonable(config),
        "config_hash": _config_hash(command, _jsonable(config)),
        "generated_at": datetime.datetime.now(datetime.timezone.utc)
        .isoformat(timespec="seconds"),
        "result": _jsonable(result),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if out_dir:
        path = os.path.join(out_dir, command)
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, payload["config_hash"] + ".json"), "w") as fh:
            fh.write(text + "\n")
    return payload


def validate_payload(doc: dict) -> None:
    """Schema check used by the round-trip tests and on reload."""
    for key in ("schema", "command", "config", "config_hash", "result"):
        if key not in doc:
            raise MalformedFileError(f"result document missing field {key!r}")
    if doc["schema"] != SCHEMA:
        raise MalformedFileError(f"unknown schema {doc['schema']!r}")


def _load_nonlinearity(path: str) -> Nonlinearity:
    return nonlinearity_from_json(load_json(path))


def _load_ansatz(path: str) -> FourierAnsatz:
    return ansatz_from_json(load_json(path))


def _periodic_from_ansatz_file(path: str, n: int) -> PeriodicFn:
    return _load_ansatz(path).sample(Grid(n))


def _rhs_from_file(f: Nonlinearity, path: str, n: int, apply_operator: bool):
    """Load a right-hand side; optionally build v = u' + f(t,u) from u."""
    ans = _load_ansatz(path)
    grid = Grid(n)
    if not apply_operator:
        return ans.sample(grid)
    t = grid.nodes
    vals = ans.derivative_eval(t) + np.asarray(f.eval(t, ans.eval(t), 0))
    return PeriodicFn(grid, vals)


def _family_from_json(doc: dict) -> search.ParamFamily:
    try:
        if doc.get("kind") == "quartic_bc":
            return search.ParamFamily.quartic_bc()
        entries = []
        for item in doc["entries"]:
            power, coeff = item
            if isinstance(coeff, dict):
                entries.append((int(power),
                                (coeff["param"], float(coeff.get("scale", 1.0)))))
            else:
                entries.append((int(power), float(coeff)))
        return search.ParamFamily(tuple(entries), tuple(doc.get("names", ())))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"bad family document: {exc}") from exc


def _write_csv(path: str, xs: np.ndarray, gs: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("# x,rho_minus_x\n")
        for x, g in zip(xs, gs):
            fh.write(f"{float(x):.17g},{float(g):.17g}\n")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_sigma(args):
    f = _load_nonlinearity(args.problem)
    u = _periodic_from_ansatz_file(args.ansatz, args.grid_n)
    report = morin.classify_point(f, u, basis_size=args.basis_size)
    result = {"sigma": report.sigma, "sigma_abc": report.sigma_abc,
              "order": report.order, "jacobian_svals": report.jacobian_svals,
              "tol_zero": report.tol_zero, "tol_rank": report.tol_rank}
    return result


def _cmd_classify_operator(args):
    f = _load_nonlinearity(args.problem)
    oc = globalgeo.classify_operator(f, args.range[0], args.range[1])
    return {"verdict": oc.verdict, "evidence": oc.evidence}


def _cmd_fibre(args):
    f = _load_nonlinearity(args.problem)
    vt = _rhs_from_file(f, args.rhs, args.grid_n, args.apply_operator) \
        if args.rhs else PeriodicFn.constant(0.0, Grid(args.grid_n))
    vt = PeriodicFn(vt.grid, vt.values - mean(vt))
    if args.trace is not None:
        lo, hi, count = args.trace
        pts = fibre_mod.fibre_trace(f, vt, lo, hi, int(count))
        return {"trace": [{"average": a, "phi": p} for a, p in pts]}
    if args.average is not None:
        constraint = fibre_mod.Average(args.average)
    elif args.initial is not None:
        constraint = fibre_mod.InitialValue(args.initial)
    else:
        raise PreconditionError("need --initial, --average or --trace")
    fp = fibre_mod.solve_periodic(f, vt, constraint)
    coeffs = FourierAnsatz.from_periodic(fp.u, min(16, fp.u.grid.n // 4))
    return {"nu": fp.nu, "phi_bar": fp.phi_bar, "mean": mean(fp.u),
            "u0": float(fp.u.values[0]), "residual": fp.residual(f),
            "u_coefficients": ansatz_to_json(coeffs)}


def _cmd_return_map(args):
    f = _load_nonlinearity(args.problem)
    v = _rhs_from_file(f, args.rhs, args.grid_n, args.apply_operator) \
        if args.rhs else None
    rv = return_map(f, v, args.x0, h=args.step, with_derivative=args.derivative)
    return {"x0": args.x0, "value": rv.value, "blew_up": rv.blew_up,
            "blow_sign": rv.blow_sign, "blow_time": rv.blow_time,
            "derivative": rv.derivative}


def _cmd_count_solutions(args):
    f = _load_nonlinearity(args.problem)
    v = _rhs_from_file(f, args.rhs, args.grid_n, args.apply_operator)
    census = search.count_solutions(f, v, args.range[0], args.range[1],
                                    scan_n=args.scan_n, h=args.step)
    if args.csv:
        keep = np.isfinite(census.scan_g)
        _write_csv(args.csv, census.scan_xs[keep], census.scan_g[keep])
    return {"count": census.count,
            "degenerate_continuum": census.degenerate_continuum,
            "roots": census.roots,
            "count_at_half_step": census.count_at_half_step,
            "stable_under_halving": census.stable_under_halving,
            "unresolved_brackets": census.unresolved_brackets,
            "csv": args.csv}


def _cmd_find_singularity(args):
    family = _family_from_json(load_json(args.family))
    ansatz = _load_ansatz(args.seed)
    params = dict(kv.split("=") for kv in args.params or [])
    fam_values = np.array([float(params.get(n, 0.0)) for n in family.names])
    problem = search.SearchProblem(
        family=family, ansatz=ansatz, target=np.asarray(args.target),
        family_params=fam_values, frozen=tuple(args.frozen or ()),
        max_iterations=args.max_iterations, grid_n=args.grid_n)
    res = search.gauss_newton(problem)
    return {"converged": res.converged, "message": res.message,
            "residual_history": res.residual_history,
            "coefficients": dict(zip(res.names, res.params)),
            "jacobian_svals": res.jacobian_svals,
            "smallest_retained_sval": res.smallest_retained_sval,
            "sigma5": res.sigma5}


def _cmd_hull(args):
    f = _load_nonlinearity(args.problem)
    curve = globalgeo.gamma_curve(f, args.k, args.range[0], args.range[1],
                                  count=args.count)
    verdict = globalgeo.hull_origin_test(curve)
    return {"k": args.k, "interior": verdict.interior, "margin": verdict.margin,
            "convex_coefficients": verdict.convex_coefficients,
            "direction": verdict.direction, "evidence": verdict.evidence,
            "certificate_residual": verdict.certificate_residual(curve.points)}


def _cmd_degree(args):
    f = _load_nonlinearity(args.problem)
    return {"degree": globalgeo.degree(f)}


def _cmd_tameness(args):
    f = _load_nonlinearity(args.problem)
    rep = globalgeo.tameness(f, s_max=args.s_max)
    return {"plus": rep.plus, "minus": rep.minus,
            "wild_suspected_at": list(rep.wild_suspected_at),
            "tame": rep.tame, "detail": rep.detail}


def _cmd_reparam(args):
    f = _load_nonlinearity(args.problem)
    u = _periodic_from_ansatz_file(args.ansatz, args.grid_n)
    direction = (globalgeo.ToSimplified(u) if args.direction == "to"
                 else globalgeo.FromSimplified(u))
    out, tc = globalgeo.reparam(f, direction)
    coeffs = FourierAnsatz.from_periodic(out, min(32, out.grid.n // 4))
    return {"direction": args.direction,
            "result_coefficients": ansatz_to_json(coeffs),
            "time_change_params": tc.params}


def _cmd_sweep(args):
    family = _family_from_json(load_json(args.family))
    grid_values = {}
    for spec_str in args.grid:
        name, rng = spec_str.split("=")
        lo, hi, num = rng.split(":")
        grid_values[name] = np.linspace(float(lo), float(hi), int(num)).tolist()

    def analysis(f, point):
        if args.analysis == "classify":
            oc = globalgeo.classify_operator(f)
            return {"verdict": oc.verdict}
        census = search.count_solutions(
            f, PeriodicFn.constant(args.rhs_constant, Grid(args.grid_n)),
            args.range[0], args.range[1], scan_n=args.scan_n, h=args.step,
            check_half_step=False)
        return {"count": census.count}

    existing = {}
    if args.out:
        prev = os.path.join(args.out, "sweep")
        if os.path.isdir(prev):
            for fn in sorted(os.listdir(prev)):
                try:
                    doc = json.load(open(os.path.join(prev, fn)))
                    validate_payload(doc)
                    for key, cell in doc["result"]["cells"].items():
                        existing[key] = search.SweepCell(
                            params=cell["params"], result=cell["result"],
                            error=cell.get("error"))
                except (OSError, ValueError, KeyError, MalformedFileError):
                    continue
    workers = max(1, int(os.environ.get("MORINODE_THREADS", "1")))
    if workers > 1:
        # evaluate cells concurrently, then merge deterministically
        names = list(grid_values.keys())
        points = [{}]
        for n in names:
            points = [dict(p, **{n: v}) for p in points for v in grid_values[n]]
        def run_cell(point):
            key = ",".join(f"{n}={point[n]:.12g}" for n in names)
            if key in existing:
                return key, existing[key]
            params = np.array([point.get(n, 0.0) for n in family.names])
            try:
                return key, search.SweepCell(point, analysis(family.build(params), point))
            except Exception as exc:
                return key, search.SweepCell(point, None, str(exc))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            table = dict(pool.map(run_cell, points))
    else:
        table = search.sweep(family, grid_values, analysis, existing=existing)
    cells = {k: {"params": c.params, "result": c.result, "error": c.error}
             for k, c in sorted(table.items())}
    return {"cells": cells}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morinode", description=__doc__)
    sub = p.add_subparsers(dest="command")

    def common(sp, rhs=False):
        sp.add_argument("--problem", required=True, help="nonlinearity JSON file")
        sp.add_argument("--grid-n", type=int, default=1024)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--rng-seed", type=int, default=0)
        if rhs:
            sp.add_argument("--rhs", default=None, help="right-hand side ansatz JSON")
            sp.add_argument("--apply-operator", action="store_true",
                            help="treat --rhs as u and use v = u' + f(t,u)")

    sp = sub.add_parser("sigma")
    common(sp)
    sp.add_argument("--ansatz", required=True)
    sp.add_argument("--basis-size", type=int, default=8)

    sp = sub.add_parser("classify-point")
    common(sp)
    sp.add_argument("--ansatz", required=True)
    sp.add_argument("--basis-size", type=int, default=8)

    sp = sub.add_parser("classify-operator")
    common(sp)
    sp.add_argument("--range", type=float, nargs=2, default=(-4.0, 4.0))

    sp = sub.add_parser("fibre")
    common(sp, rhs=True)
    sp.add_argument("--initial", type=float, default=None)
    sp.add_argument("--average", type=float, default=None)
    sp.add_argument("--trace", type=float, nargs=3, default=None,
                    metavar=("LO", "HI", "COUNT"))

    sp = sub.add_parser("return-map")
    common(sp, rhs=True)
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--derivative", action="store_true")

    sp = sub.add_parser("count-solutions")
    common(sp, rhs=True)
    sp.add_argument("--range", type=float, nargs=2, required=True)
    sp.add_argument("--step", type=float, default=2e-4)
    sp.add_argument("--scan-n", type=int, default=search.SCAN_POINTS)
    sp.add_argument("--csv", default=None, help="write the scan curve here")

    sp = sub.add_parser("find-singularity")
    sp.add_argument("--family", required=True, help="family JSON file")
    sp.add_argument("--seed", required=True, help="seed ansatz JSON")
    sp.add_argument("--target", type=float, nargs="+", required=True)
    sp.add_argument("--params", nargs="*", default=None, metavar="NAME=VALUE")
    sp.add_argument("--frozen", nargs="*", default=None)
    sp.add_argument("--max-iterations", type=int, default=100)
    sp.add_argument("--grid-n", type=int, default=search.SIGMA_GRID_N)
    sp.add_argument("--out", default=None)
    sp.add_argument("--rng-seed", type=int, default=0)

    sp = sub.add_parser("hull")
    common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--range", type=float, nargs=2, default=(-4.0, 4.0))
    sp.add_argument("--count", type=int, default=globalgeo.DEFAULT_CURVE_SAMPLES)

    sp = sub.add_parser("degree")
    common(sp)

    sp = sub.add_parser("tameness")
    common(sp)
    sp.add_argument("--s-max", type=float, default=50.0)

    sp = sub.add_parser("reparam")
    common(sp)
    sp.add_argument("--ansatz", required=True)
    sp.add_argument("--direction", choices=("to", "from"), required=True)

    sp = sub.add_parser("sweep")
    sp.add_argument("--family", required=True)
    sp.add_argument("--grid", nargs="+", required=True,
                    metavar="NAME=LO:HI:NUM")
    sp.add_argument("--analysis", choices=("classify", "count"),
                    default="classify")
    sp.add_argument("--range", type=float, nargs=2, default=(-2.0, 2.0))
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--scan-n", type=int, default=201)
    sp.add_argument("--rhs-constant", type=float, default=0.0)
    sp.add_argument("--grid-n", type=int, default=1024)
    sp.add_argument("--out", default=None)
    sp.add_argument("--rng-seed", type=int, default=0)
    return p


_HANDLERS = {
    "sigma": _cmd_sigma,
    "classify-point": _cmd_sigma,
    "classify-operator": _cmd_classify_operator,
    "fibre": _cmd_fibre,
    "return-map": _cmd_return_map,
    "count-solutions": _cmd_count_solutions,
    "find-singularity": _cmd_find_singularity,
    "hull": _cmd_hull,
    "degree": _cmd_degree,
    "tameness": _cmd_tameness,
    "reparam": _cmd_reparam,
    "sweep": _cmd_sweep,
}


def execute(argv: list[str]) -> int:
    """Run one subcommand; returns the process exit code."""
    if not argv or argv[0] in ("-h", "--help"):
        _build_parser().print_help()
        return EXIT_OK
    if argv[0] not in COMMANDS:
        sys.stderr.write(f"morinode: unknown subcommand {argv[0]!r}\n")
        return EXIT_USAGE
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PRECONDITION if exc.code else EXIT_OK
    config = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    try:
        result = _HANDLERS[args.command](args)
    except MalformedFileError as exc:
        sys.stderr.write(f"morinode: malformed input: {exc}\n")
        return EXIT_BAD_FILE
    except PreconditionError as exc:
        sys.stderr.write(f"morinode: precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    except MorinodeError as exc:
        sys.stderr.write(f"morinode: {exc}\n")
        return EXIT_PRECONDITION
    _emit(args.command, config, result, getattr(args, "out", None))
    return EXIT_OK


def main() -> None:
    sys.exit(execute(sys.argv[1:]))
