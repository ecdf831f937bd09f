"""Command-line interface: ``wcaro solve | check | sweep | bench``.

Exit codes: 0 success, 1 input or validation error, 2 infeasible, 3 stopped at a
node or time limit, 4 instance too large for the brute-force oracle.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .branch_bound import GAP_LIMIT, NODE_LIMIT
from .estimator import RobustMipApproximator
from .exceptions import TooLarge, WcaroError
from .io import load_instance, write_lp
from .oracle import BINARY_CAP, VERTEX_CAP, binary_assignments, enumerate_vertices
from .powergrid import (PowerBuildParams, build_power_instance, data_path, load_timeseries,
                        parse_case, power_solution_report)
from .reformulate import build_single_level
from .simplex import INFEASIBLE, OPTIMAL

logger = logging.getLogger("wcaro")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_TOO_LARGE = 0, 1, 2, 3, 4
THREADS_ENV = "WCARO_THREADS"
SWEEP_COLUMNS = ("R", "objective", "gap", "wall_time")
BENCH_COLUMNS = ("name", "buses", "n_bin", "wall_time", "objective", "status")


@dataclass
class RunRecord:
    name: str
    params: dict
    status: str
    objective: float
    best_bound: float
    gap: float
    wall_time: float
    nodes: int
    unit: str = ""
    cert_margin: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.wall_time >= 0:
            raise ValueError("wall time must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        for k in ("objective", "best_bound", "gap", "cert_margin"):
            d[k] = _json_num(d[k])
        return d


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


def _fmt(v):
    """Stable text form of a float for CSV output."""
    v = float(v)
    return f"{v:.12g}" if math.isfinite(v) else str(v)


def exit_code_for(status):
    if status == OPTIMAL:
        return EXIT_OK
    if status == INFEASIBLE:
        return EXIT_INFEASIBLE
    if status in (GAP_LIMIT, NODE_LIMIT):
        return EXIT_LIMIT
    return EXIT_ERROR


def _record(name, params, est, unit=""):
    sol = est.solution_
    return RunRecord(name, params, sol.status, sol.objective, sol.best_bound, sol.gap,
                     est.wall_time_, sol.nodes, unit)


def _write_json(payload, out):
    text = json.dumps(payload, indent=1)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def parse_subset(text):
    """``"1,2"`` -> ``[1, 2]``; ``""`` -> ``[]``; ``None`` keeps every storage."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"storage subset must list bus ids, got {text!r}") from None


def parse_r_grid(text):
    """``"a:b:step"`` -> grid points from ``a`` to ``b`` inclusive."""
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValueError(f"R grid must look like a:b:step, got {text!r}") from None
    if not step > 0:
        raise ValueError("R grid step must be positive")
    if b < a:
        raise ValueError("R grid end is below its start")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + k * step, 12) for k in range(n)]


def load_power(case_path, ts_path, storage_subset=None):
    case = parse_case(case_path)
    ts = load_timeseries(ts_path)
    if storage_subset is not None:
        unknown = set(storage_subset) - set(case.storages.bus.tolist())
        if unknown:
            raise ValueError(f"no storage at bus(es) {sorted(unknown)}")
        case = case.with_storages(storage_subset)
    return case, ts


def solve_power_point(case, ts, R, gap=1e-6, engine="native", convention="absolute"):
    """Solve one power-model instance; returns ``(RunRecord, estimator, layout)``."""
    inst, layout = build_power_instance(case, ts, PowerBuildParams(R=R,
                                        penalty_convention=convention), return_layout=True)
    est = RobustMipApproximator(gap=gap, engine=engine).fit(inst)
    rec = _record(inst.name, {"R": R, "gap": gap, "engine": engine, "convention": convention,
                              "storages": case.storages.bus.tolist()}, est, case.unit)
    rec.extra = {"buses": case.n_bus, "n_bin": inst.third.n_bin}
    return rec, est, layout


def _sweep_point(args):
    case, ts, R, gap, engine, convention = args
    rec, _, _ = solve_power_point(case, ts, R, gap, engine, convention)
    return rec


# -- subcommands --------------------------------------------------------------------

def cmd_solve(args):
    if args.instance:
        inst = load_instance(args.instance)
        est = RobustMipApproximator(gap=args.gap, engine=args.engine).fit(inst)
        rec = _record(inst.name, {"gap": args.gap, "engine": args.engine}, est)
        payload = {"record": rec.to_dict()}
    else:
        if not (args.case and args.timeseries):
            raise ValueError("solve needs --instance or both --case and --timeseries")
        case, ts = load_power(args.case, args.timeseries, parse_subset(args.storage_subset))
        rec, est, layout = solve_power_point(case, ts, args.R, args.gap, args.engine,
                                             args.convention)
        inst = est.instance_
        payload = {"record": rec.to_dict()}
        if est.solution_.status in (OPTIMAL, GAP_LIMIT, NODE_LIMIT) \
                and np.all(np.isfinite(est.y_)):
            payload["power_report"] = power_solution_report(case, layout, inst, est.y_)
    payload["solution"] = est.solution_.to_dict()
    if args.lp:
        mip = build_single_level(inst)
        write_lp(mip.base, args.lp, mip.binary_cols)
    _write_json(payload, args.out)
    logger.info("%s: %s objective %s", rec.name, rec.status, _fmt(rec.objective))
    return exit_code_for(rec.status)


def cmd_check(args):
    inst = load_instance(args.instance)
    try:
        binary_assignments(inst.third.n_bin, args.binary_cap)
        vertices = enumerate_vertices(inst.omega, args.vertex_cap)
    except TooLarge as exc:
        print(f"oracle cap exceeded: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    est = RobustMipApproximator(gap=args.gap, engine=args.engine).fit(inst)
    if est.solution_.status != OPTIMAL:
        print(f"error: MIP not solved to optimality ({est.solution_.status})", file=sys.stderr)
        return exit_code_for(est.solution_.status)
    report = est.certify(tol=args.tol, binary_cap=args.binary_cap, vertices=vertices)
    rec = _record(inst.name, {"tol": args.tol}, est)
    rec.cert_margin = report.margin
    _write_json({"record": rec.to_dict(), "report": report.to_dict()}, args.out)
    return EXIT_OK if report.margin >= -args.tol else EXIT_ERROR


def worker_count(requested=None):
    if requested:
        return max(1, int(requested))
    env = os.environ.get(THREADS_ENV, "").strip()
    return max(1, int(env)) if env else 1


def cmd_sweep(args):
    grid = parse_r_grid(args.r_grid)
    case, ts = load_power(args.case, args.timeseries, parse_subset(args.storage_subset))
    jobs = [(case, ts, R, args.gap, args.engine, args.convention) for R in grid]
    n = min(worker_count(args.workers), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            records = list(pool.map(_sweep_point, jobs))  # map keeps grid order
    else:
        records = [_sweep_point(j) for j in jobs]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for R, rec in zip(grid, records):
        # timings are the only run-dependent column; reproducible runs omit them
        wall = "NA" if args.seed is not None else _fmt(rec.wall_time)
        writer.writerow([_fmt(R), _fmt(rec.objective), _fmt(rec.gap), wall])
    _write_text(buf.getvalue(), args.out)
    return max(exit_code_for(r.status) for r in records)


def _write_text(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _resolve(name, base):
    p = Path(name)
    for cand in (p, base / p):
        if cand.is_file():
            return cand
    bundled = data_path(str(name))
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"unknown fixture {name!r}")


def load_suite(path):
    """Read a suite JSON and resolve every fixture path (relative to the suite or bundled)."""
    suite_path = _resolve(path, Path.cwd())
    cases = json.loads(suite_path.read_text(encoding="utf-8"))["cases"]
    base = Path(str(suite_path)).parent
    out = []
    for entry in cases:
        e = dict(entry)
        e["case"] = _resolve(e["case"], base)
        e["timeseries"] = _resolve(e["timeseries"], base)
        out.append(e)
    return out


def cmd_bench(args):
    entries = load_suite(args.suite)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    code = EXIT_OK
    for e in entries:
        case, ts = load_power(e["case"], e["timeseries"], e.get("storage_subset"))
        rec, _, _ = solve_power_point(case, ts, float(e.get("R", 1.0)),
                                      float(e.get("gap", args.gap)), args.engine)
        logger.info("%s: %s in %.2fs", e.get("name", case.name), rec.status, rec.wall_time)
        writer.writerow([e.get("name", case.name), case.n_bus, rec.extra["n_bin"],
                         _fmt(rec.wall_time), _fmt(rec.objective), rec.status])
        code = max(code, exit_code_for(rec.status))
    _write_text(buf.getvalue(), args.out)
    return code


# -- argument parsing ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="wcaro", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def engine_opts(p, gap=1e-6):
        p.add_argument("--gap", type=float, default=gap, help="relative MIP gap")
        p.add_argument("--engine", choices=("native", "highs"), default="native")

    def power_opts(p):
        p.add_argument("--storage-subset", default=None,
                       help="comma-separated storage bus ids to keep ('' keeps none)")
        p.add_argument("--convention", choices=("absolute", "signed"), default="absolute",
                       help="deviation penalty convention")

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--instance", help="instance JSON")
    p.add_argument("--case", help="grid case (.json or .m)")
    p.add_argument("--timeseries", help="day series CSV")
    p.add_argument("--R", type=float, default=1.0, help="forecast error bound")
    p.add_argument("--out", help="solution JSON (stdout when omitted)")
    p.add_argument("--lp", help="also export the single-level model as LP text")
    engine_opts(p)
    power_opts(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="certify a solution against the brute-force oracle")
    p.add_argument("--instance", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.add_argument("--vertex-cap", type=int, default=VERTEX_CAP)
    p.add_argument("--binary-cap", type=int, default=BINARY_CAP)
    engine_opts(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="solve a grid of R values")
    p.add_argument("--case", required=True)
    p.add_argument("--timeseries", required=True)
    p.add_argument("--r-grid", required=True, help="a:b:step")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, help=f"processes (default ${THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int,
                   help="reproducible mode: output is byte-stable, wall_time is NA")
    engine_opts(p)
    power_opts(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time the cases of a suite")
    p.add_argument("--suite", required=True, help="suite JSON (path or bundled name)")
    p.add_argument("--out")
    engine_opts(p, gap=1e-4)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except (WcaroError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logger.info("done in %.2fs", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
