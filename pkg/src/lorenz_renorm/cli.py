"""Command-line entry point: ``solve``, ``verify`` and ``sweep``.

Exit codes: 0 success, 2 bad configuration or unreadable result file,
3 no sign change on a bracket, 4 iteration did not converge,
5 verification failed.  Failures print a JSON error object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import herglotz, scalings
from .errors import ConfigError, DomainError, RenormError, UsageError
from .fixed_point import (
    Check,
    SolveResult,
    evaluate_gap,
    find_critical_r,
    invariant_checks,
    reconstruct_lorenz,
)
from .funcrep import FuncRep
from .records import OUTPUT_DIR_ENV, ResultRecord, RunConfig, default_output_dir
from .renorm_op import EpsteinPair

SWEEP_HEADER = ["rho", "r", "lambda", "mu", "gap", "error"]
STORED_LAMBDA_TOL = 1e-10


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

def record_from_result(res: SolveResult, config: RunConfig, include_trace: bool = False) -> ResultRecord:
    sc = res.scalings
    trace = None
    if include_trace and res.trace is not None:
        trace = [asdict(rec) for rec in res.trace.records]
    return ResultRecord(
        config=config.to_dict(),
        rho=res.rho,
        r_star=res.r_star,
        lambda_star=res.lambda_star,
        mu_star=res.mu_star,
        a=sc.a, b=sc.b, y=sc.y,
        scalings=sc.to_dict(),
        residuals=dict(res.residuals),
        checks=[c.to_dict() for c in res.checks],
        iterations=int(res.trace_summary["iterations"]),
        wall_time=res.wall_time,
        U_samples=res.pair_star.U.samples.tolist(),
        V_samples=res.pair_star.V.samples.tolist(),
        trace=trace,
    )


def _cell(fn, x):
    """Value of ``fn`` at ``x`` or ``""`` when undefined there."""
    try:
        with np.errstate(all="ignore"):
            v = float(fn(x))
    except RenormError:
        return ""
    return repr(v) if math.isfinite(v) else ""


def write_fixed_point_csv(res: SolveResult, path: Path, n: int) -> Path:
    """Columns x, f, g, U, V, N_Z, N_W on ``n`` points of ``[-1, r]``; blanks outside a domain."""
    pair, model, r, rho = res.pair_star, res.map, res.r_star, res.rho

    # both nonlinearities have a pole where the root argument vanishes
    def n_z(x):
        if r + x <= 0:
            raise DomainError("N_Z has a pole at x = -r")
        return herglotz.root_nonlinearity(pair.U, np.array([r + x]), rho)[0]

    def n_w(x):
        if 1.0 + x <= 0:
            raise DomainError("N_W has a pole at x = -1")
        return herglotz.root_nonlinearity(pair.V, np.array([1.0 + x]), rho)[0]

    def f(x):
        if x > 0:
            raise UsageError("left branch only")
        return model.f(x)

    def g(x):
        if x < 0:
            raise UsageError("right branch only")
        return model.g(x)

    cols = (f, g, pair.U, pair.V, n_z, n_w)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "f(x)", "g(x)", "U(x)", "V(x)", "N_Z(x)", "N_W(x)"])
        for x in np.linspace(-1.0, r, n):
            x = float(x)
            w.writerow([repr(x)] + [_cell(c, x) for c in cols])
    return path


def cmd_solve(config: RunConfig, *, include_trace: bool = False, log=print) -> tuple[int, ResultRecord]:
    """Solve, write the requested files, and return 5 if a gating check failed."""
    res = find_critical_r(
        config.rho, (config.bracket_lo, config.bracket_hi), config.tol_r,
        degree=config.degree, iterate_tol=config.iterate_tol, max_iter=config.max_iter,
    )
    record = record_from_result(res, config, include_trace)
    out = config.output_dir
    if "json" in config.emit:
        log(f"wrote {record.write(out / 'result.json')}")
    if "csv" in config.emit:
        log(f"wrote {write_fixed_point_csv(res, out / 'fixed_point.csv', config.grid_out)}")
    log(f"rho={res.rho} r_star={res.r_star!r} lambda_star={res.lambda_star!r} "
        f"mu_star={res.mu_star!r} ({res.wall_time:.1f} s)")
    for c in res.checks:
        flag = "ok" if c.ok else ("FAIL" if c.gating else "not met")
        log(f"  {c.name:20s} {c.value:.3e}  [{flag}]")
    if not res.gating_passed:
        breached = [c.name for c in res.checks if c.gating and not c.ok]
        log(f"invariant checks FAILED: {', '.join(breached)}")
        return 5, record
    return 0, record


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------

def verify_record(record: ResultRecord, *, map_degree: Optional[int] = None) -> list[Check]:
    """Rebuild the pair from stored samples and re-derive every gating check."""
    r, rho = record.r_star, record.rho
    try:
        U = FuncRep(scalings.domain_U(r, rho), record.U_samples)
        V = FuncRep(scalings.domain_V(r, rho), record.V_samples)
    except RenormError as exc:
        return [Check("samples", math.nan, 0.0, False)] + [Check(f"error: {exc}", math.nan, 0.0, False)]
    pair = EpsteinPair(U, V, r, rho, validate=False)
    problems = pair.problems()
    checks = [Check("pair_invariants", float(len(problems)), 0.0, not problems)]
    try:
        sc = scalings.solve_scalings(U, V, r, rho)
        model = reconstruct_lorenz(pair, sc, map_degree)
        checks += invariant_checks(pair, sc, model)
    except RenormError as exc:
        checks.append(Check(f"reconstruction ({type(exc).__name__})", math.nan, 0.0, False))
        return checks
    dl = abs(sc.lam - record.lambda_star)
    checks.append(Check("stored_lambda", dl, STORED_LAMBDA_TOL, dl <= STORED_LAMBDA_TOL))
    return checks


def cmd_verify(path, *, map_degree: Optional[int] = None, log=print) -> tuple[int, dict]:
    record = ResultRecord.read(path)
    checks = verify_record(record, map_degree=map_degree)
    breached = [c.name for c in checks if c.gating and not c.ok]
    report = {"result": str(path), "passed": not breached, "breached": breached,
              "checks": [c.to_dict() for c in checks]}
    for c in checks:
        flag = "ok" if c.ok else ("FAIL" if c.gating else "not met")
        log(f"  {c.name:20s} {c.value:.3e}  [{flag}]")
    log("verification passed" if not breached else f"verification FAILED: {', '.join(breached)}")
    return (0 if not breached else 5), report


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _sweep_cell(args) -> list:
    rho, r, degree, iterate_tol, max_iter = args
    try:
        ev = evaluate_gap(r, rho, iterate_tol=iterate_tol, degree=degree, max_iter=max_iter)
    except RenormError as exc:
        return [rho, r, "", "", "", f"{type(exc).__name__}: {exc}"]
    return [rho, r, ev.lam, ev.mu, ev.gap, ""]


def cmd_sweep(rho_list: Sequence[float], r_grid: Sequence[float], config: RunConfig, *,
              workers: int = 1, log=print) -> tuple[int, list]:
    """Gap table over ``rho_list`` x ``r_grid``; rows in input order, failures kept in-row."""
    if not rho_list or not r_grid:
        raise ConfigError("sweep needs at least one rho and one r")
    if any(r <= 0 for r in r_grid) or any(rho <= 1 for rho in rho_list):
        raise ConfigError("sweep needs r > 0 and rho > 1")
    cells = [(float(rho), float(r), config.degree, config.iterate_tol, config.max_iter)
             for rho in rho_list for r in r_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    path = config.output_dir / "sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    log(f"wrote {path} ({len(rows)} rows)")
    return 0, rows


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--degree", type=int, default=64, help="interpolation degree (16..512)")
    p.add_argument("--iterate-tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--output-dir", type=Path, default=None,
                   help=f"output directory (default: ${OUTPUT_DIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorenz-renorm",
                                     description="Renormalization fixed points of Lorenz maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="find r where the scalings agree and rebuild the fixed point")
    p.add_argument("--rho", type=float, required=True)
    _common(p)
    p.add_argument("--tol-r", type=float, default=1e-8)
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"), default=(0.05, 2.0))
    p.add_argument("--grid-out", type=int, default=200)
    p.add_argument("--emit", nargs="+", choices=["json", "csv"], default=["json", "csv"])
    p.add_argument("--trace", action="store_true", help="store the per-iterate trace in result.json")

    p = sub.add_parser("verify", help="re-derive residuals from a stored result.json")
    p.add_argument("result", type=Path)
    p.add_argument("--map-degree", type=int, default=None)
    p.add_argument("--report", type=Path, default=None, help="write the JSON report here")

    p = sub.add_parser("sweep", help="tabulate lambda - mu over rho and r grids")
    p.add_argument("--rho", type=float, nargs="+", required=True)
    p.add_argument("--r", type=float, nargs="*", default=[])
    _common(p)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _config(args, **extra) -> RunConfig:
    out = args.output_dir if args.output_dir is not None else default_output_dir()
    return RunConfig(degree=args.degree, iterate_tol=args.iterate_tol, max_iter=args.max_iter,
                     output_dir=out, **extra)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            config = _config(args, rho=args.rho, tol_r=args.tol_r, bracket_lo=args.bracket[0],
                             bracket_hi=args.bracket[1], grid_out=args.grid_out, emit=args.emit)
            code, _ = cmd_solve(config, include_trace=args.trace)
        elif args.command == "verify":
            code, report = cmd_verify(args.result, map_degree=args.map_degree)
            if args.report is not None:
                args.report.write_text(json.dumps(report, indent=1))
        else:
            config = _config(args, rho=min(args.rho) if args.rho else 2.0)
            code, _ = cmd_sweep(args.rho, args.r, config, workers=args.workers)
    except RenormError as exc:
        print(json.dumps({"error": exc.to_dict(), "exit_code": exc.exit_code}), file=sys.stderr)
        return exc.exit_code
    return code


if __name__ == "__main__":
    sys.exit(main())
