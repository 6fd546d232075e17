"""Command line entry point.

    periodic-ch run <config.yaml> [--out DIR]
    periodic-ch sweep <dir> [--workers N]
    periodic-ch props [--seed S] [--samples N]
    periodic-ch plotdata <rundir>

Exit codes: 0 converged, 2 completed without convergence, 1 error.
``PERIODIC_CH_OUTPUT_ROOT`` overrides the root of relative output directories.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, properties
from .config import build_problem, load_config
from .domain import read_snapshot, write_snapshot
from .errors import ConfigError, NumericFailure
from .periodic import epsilon_continuation, fixed_point_solve, verify_weak_solution

log = logging.getLogger("periodic_ch")

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2
OUTPUT_ROOT_ENV = "PERIODIC_CH_OUTPUT_ROOT"


def _output_dir(cfg, override=None) -> Path:
    out = Path(override or cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _fmt(x) -> str:
    return repr(float(x))


def run(cfg, out_dir=None) -> int:
    """Run the configured pipeline and write its artifacts; returns the exit code."""
    out = _output_dir(cfg, out_dir)
    prob = build_problem(cfg)
    ops = prob.model.ops
    log.info("c_P = %.6g", ops.poincare_constant())

    if cfg.pipeline == "continuation":
        cont = epsilon_continuation(prob, cfg.eps_schedule)
        sols, failures, cauchy = cont.solutions, cont.failures, cont.cauchy
    else:
        sols = [fixed_point_solve(prob, cfg.eps_schedule[0])]
        failures, cauchy = {}, []
    if not sols:
        raise NumericFailure(f"no eps level completed: {failures}")

    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)
    with open(out / "picard.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "iter", "residual", "phi_eps_v0"])
        for s in sols:
            for k, (r, phi) in enumerate(zip(s.residuals, s.phi_history), start=1):
                w.writerow([_fmt(s.eps), k, _fmt(r), _fmt(phi)])
    with open(out / "continuation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "converged", "picard_iters", "residual", "cauchy_to_next"])
        for k, s in enumerate(sols):
            c = _fmt(cauchy[k]) if k < len(cauchy) else ""
            w.writerow([_fmt(s.eps), int(s.converged), s.picard_iters, _fmt(s.residual), c])

    final = sols[-1]
    est = diagnostics.log_from_solution(prob, final)
    est.to_csv(out / "run.csv")
    last = final.trajectory[-1]
    write_snapshot(out / "snapshots" / "v0.csv", prob.dom, final.v0)
    write_snapshot(out / "snapshots" / "u.csv", prob.dom, last.v + prob.m0)
    write_snapshot(out / "snapshots" / "mu.csv", prob.dom, last.mu)

    weak = verify_weak_solution(final, prob)
    logs = [diagnostics.log_from_solution(prob, s) for s in sols]
    bounded = diagnostics.assert_bounded(logs) if len({s.eps for s in sols}) >= 2 else None
    converged = all(s.converged for s in sols) and not failures
    summary = {
        "name": cfg.name,
        "converged": converged,
        "poincare_constant": ops.poincare_constant(),
        "levels": [
            {"eps": s.eps, "converged": s.converged, "picard_iters": s.picard_iters, "residual": s.residual}
            for s in sols
        ],
        "residual": final.residual,
        "cauchy": cauchy,
        "failures": {str(k): v for k, v in failures.items()},
        "weak_form": {
            "weak1": weak.weak1, "weak2": weak.weak2, "viscous": weak.viscous,
            "graph_excess": weak.graph_excess, "mass_deviation": weak.mass_deviation,
        },
        "boundedness": None if bounded is None else {
            "ok": bounded.ok, "growth": bounded.growth, "failures": bounded.failures,
            "eps_dependent": bounded.eps_dependent,
        },
    }
    est.write_summary(out / "summary.json", summary)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def emit_plot_data(rundir) -> None:
    """Space-separated columns for gnuplot: mass, phi, residual and final profile."""
    rundir = Path(rundir)
    needed = [rundir / "run.csv", rundir / "picard.csv", rundir / "snapshots" / "u.csv", rundir / "snapshots" / "mu.csv"]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise FileNotFoundError("missing artifacts: " + ", ".join(missing))
    plot = rundir / "plot"
    plot.mkdir(exist_ok=True)
    with open(rundir / "run.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    (plot / "mass.dat").write_text("".join(f"{r['t']} {r['mass']}\n" for r in rows))
    (plot / "phi.dat").write_text("".join(f"{r['t']} {r['phi_eps']}\n" for r in rows))
    with open(rundir / "picard.csv", newline="") as fh:
        prow = list(csv.DictReader(fh))
    # residual history of the last (smallest) eps level
    last_eps = prow[-1]["eps"] if prow else None
    (plot / "residual.dat").write_text("".join(
        f"{r['iter']} {r['residual']}\n" for r in prow if r["eps"] == last_eps
    ))
    with open(needed[2], newline="") as fh:
        coords = [(r["coord1"], r["coord2"]) for r in csv.DictReader(fh) if r["region"] == "bulk"]
    u = read_snapshot(needed[2])
    mu = read_snapshot(needed[3])
    (plot / "profile.dat").write_text("".join(
        f"{c1} {c2} {_fmt(a)} {_fmt(b)}\n" for (c1, c2), a, b in zip(coords, u.bulk, mu.bulk)
    ))


def _run_path(path, out_dir=None) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return run(cfg, out_dir)
    except (NumericFailure, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _sweep_one(args):
    path, root = args
    cfg_out = Path(root) / Path(path).stem if root else None
    return str(path), _run_path(path, cfg_out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="periodic-ch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run one config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides the config)")
    p_sweep = sub.add_parser("sweep", help="run every *.yaml config in a directory")
    p_sweep.add_argument("dir")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", default=None, help="root for per-config output directories")
    p_props = sub.add_parser("props", help="randomized property suite")
    p_props.add_argument("--seed", type=int, default=0)
    p_props.add_argument("--samples", type=int, default=10_000)
    p_plot = sub.add_parser("plotdata", help="write gnuplot data for a finished run")
    p_plot.add_argument("rundir")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.cmd == "run":
        return _run_path(args.config, args.out)
    if args.cmd == "sweep":
        paths = sorted(Path(args.dir).glob("*.yaml"))
        if not paths:
            print(f"error: no configs in {args.dir}", file=sys.stderr)
            return EXIT_ERROR
        jobs = [(p, args.out) for p in paths]
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_sweep_one, jobs))
        else:
            results = [_sweep_one(j) for j in jobs]
        for path, code in results:
            print(f"{code} {path}")
        codes = [c for _, c in results]
        return EXIT_ERROR if EXIT_ERROR in codes else max(codes)
    if args.cmd == "props":
        results = properties.run_all(np.random.default_rng(args.seed), n=args.samples)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_ERROR
    if args.cmd == "plotdata":
        try:
            emit_plot_data(args.rundir)
        except (FileNotFoundError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        return EXIT_OK
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
