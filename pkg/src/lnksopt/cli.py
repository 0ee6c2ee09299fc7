"""``lnks-bench``: mesh/target generation, accuracy study, optimizer runs and verification suites.

Exit codes: 0 success, 2 verification failure, 3 solver divergence or
optimizer failure, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import METHODS, ConfigError, RunConfig

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_DIVERGED = 0, 1, 2, 3


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_text(path, text):
    handle, close = _open_out(path)
    try:
        handle.write(text)
    finally:
        if close:
            handle.close()


def build_problem(cfg: RunConfig):
    from .euler.objective import BoundaryTrace
    from .problem import BumpConfig, ShapeProblem

    bump = BumpConfig(p=cfg.p, nx=cfg.nx, ny=cfg.ny, n_design=cfg.n_design, h_init=cfg.h_init,
                      h_target=cfg.h_target, flow_tol=cfg.flow_tol, linear_rtol=cfg.linear_rtol,
                      target=cfg.target)
    target = None
    if cfg.target_file:
        target = BoundaryTrace.from_json(Path(cfg.target_file).read_text())
    return ShapeProblem(bump, target)


def make_optimizer(cfg: RunConfig, problem):
    from .fullspace import FullSpaceConfig, FullSpaceOptimizer
    from .reduced import ReducedConfig, ReducedSpaceOptimizer

    if cfg.method.startswith("reduced"):
        rc = ReducedConfig(method=cfg.method.split("-", 1)[1], grad_rtol=cfg.opt_rtol,
                           krylov_rtol=cfg.krylov_rtol)
        if cfg.max_cycles:
            rc.max_cycles = cfg.max_cycles
        elif rc.method == "bfgs":
            rc.max_cycles = 400
        return ReducedSpaceOptimizer(problem, rc)
    pc = {"full-p4": "P4", "full-p2": "P2", "full-p4t": "P4t", "full-p2t": "P2t"}[cfg.method]
    fc = FullSpaceConfig(preconditioner=pc, kkt_rtol=cfg.opt_rtol, krylov_rtol=cfg.krylov_rtol)
    if cfg.max_cycles:
        fc.max_cycles = cfg.max_cycles
    return FullSpaceOptimizer(problem, fc)


def geometry_json(cfg: RunConfig, problem, result):
    x = problem.x0 + problem.G.dot(result.z)
    wall = problem.param.nodes
    xy = x.reshape(-1, 2)[wall]
    return json.dumps({
        "schema": 1, "method": cfg.method, "state_size": problem.n_state, "n_design": problem.n,
        "converged": bool(result.converged), "cycles": result.cycles, "message": result.message,
        "z": np.asarray(result.z).tolist(), "wall_x": xy[:, 0].tolist(), "wall_y": xy[:, 1].tolist(),
        "ffd": json.loads(problem.box.to_json(result.z)),
    }, indent=1)


def run_optimization(cfg: RunConfig, csv_path=None, json_path=None, log_cycles=True):
    """Run one optimization; returns ``(exit_code, result_or_None, rows)``."""
    from . import telemetry
    from .euler.solver import FlowDivergenceError

    problem = build_problem(cfg)
    opt = make_optimizer(cfg, problem)
    rows = []

    def cb(row):
        rows.append(row)
        if log_cycles:
            logging.info("cycle %d  |grad| %.3e  I %.3e  subits %d  work %.1f", row["cycle"],
                         row["grad_norm"], row["objective"], row["subiterations"], row["work"])

    code, result = EXIT_OK, None
    try:
        result = opt.run(callback=cb)
        if not result.converged:
            code = EXIT_DIVERGED
    except (FlowDivergenceError, ArithmeticError, ValueError, RuntimeError) as exc:
        logging.error("optimizer failed: %s", exc)
        code = EXIT_DIVERGED
    if csv_path:
        handle, close = _open_out(csv_path)
        try:
            handle.write(f"# schema={telemetry.SCHEMA_VERSION} method={cfg.method} "
                         f"state_size={problem.n_state} n_design={problem.n}\n")
            telemetry.to_csv(rows, handle)
        finally:
            if close:
                handle.close()
    if json_path and result is not None:
        _write_text(json_path, geometry_json(cfg, problem, result) + "\n")
    return code, result, rows


# -- subcommands ---------------------------------------------------------------
def cmd_mesh(args):
    from .euler.mesh import bump_mesh

    disc = bump_mesh(args.nx, args.ny, args.p, h=args.h)
    data = {"nx": args.nx, "ny": args.ny, "p": args.p, "h": args.h, "cells": disc.n_cells,
            "state_size": disc.n_state, "nodes": disc.nodes.tolist()}
    _write_text(args.out, json.dumps(data) + "\n")
    return EXIT_OK


def _load_config(args):
    text = Path(args.config).read_text() if getattr(args, "config", None) else ""
    overrides = {k: getattr(args, k, None) for k in ("method", "p", "nx", "ny", "n_design", "seed", "max_cycles")}
    return RunConfig.from_text(text, **overrides)


def cmd_target(args):
    cfg = _load_config(args)
    problem = build_problem(cfg)
    _write_text(args.out, problem.target.to_json() + "\n")
    return EXIT_OK


def cmd_accuracy(args):
    from .accuracy import COLUMNS, run_accuracy_study

    ps = [int(v) for v in args.p.split(",")]
    cells = [int(v) for v in args.cells.split(",")]
    rows = run_accuracy_study(ps, cells, constant_state=args.constant_state)
    handle, close = _open_out(args.out)
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([r.p, r.cells, r.dofs, repr(r.error), "" if math.isnan(r.rate) else f"{r.rate:.4f}",
                        int(r.converged)])
    finally:
        if close:
            handle.close()
    return EXIT_OK if all(r.converged for r in rows) else EXIT_DIVERGED


def cmd_optimize(args):
    cfg = _load_config(args)
    code, result, _ = run_optimization(cfg, args.csv, args.json)
    if result is not None:
        logging.info("%s: %s after %d cycles", cfg.method, result.message, result.cycles)
    return code


def cmd_config(args):
    cfg = _load_config(args)
    _write_text(args.out, cfg.to_text())
    return EXIT_OK


def cmd_verify(args):
    from .verification import run_suite

    kwargs = {"seeds": args.seeds} if args.suite == "precond" else {}
    checks = run_suite(args.suite, **kwargs)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{args.suite}: {len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def build_parser():
    parser = argparse.ArgumentParser(prog="lnks-bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="write a bump mesh as JSON")
    m.add_argument("--nx", type=int, default=32)
    m.add_argument("--ny", type=int, default=8)
    m.add_argument("--p", type=int, default=1)
    m.add_argument("--h", type=float, default=0.0625)
    m.add_argument("--out", default="-")
    m.set_defaults(func=cmd_mesh)

    def run_opts(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--p", type=int)
        sp.add_argument("--nx", type=int)
        sp.add_argument("--ny", type=int)
        sp.add_argument("--n-design", dest="n_design", type=int)
        sp.add_argument("--max-cycles", dest="max_cycles", type=int)
        sp.add_argument("--seed", type=int)

    t = sub.add_parser("target", help="solve the target flow and write its wall trace as JSON")
    run_opts(t)
    t.add_argument("--out", default="-")
    t.set_defaults(func=cmd_target)

    c = sub.add_parser("config", help="write the resolved configuration")
    run_opts(c)
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_config)

    a = sub.add_parser("accuracy", help="entropy-error convergence study (CSV)")
    a.add_argument("--p", default="1,2,3")
    a.add_argument("--cells", default="64,256")
    a.add_argument("--constant-state", action="store_true",
                   help="evaluate the free stream instead of solving (errors are zero)")
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_accuracy)

    o = sub.add_parser("optimize", help="run one optimizer (CSV telemetry, JSON geometry)")
    run_opts(o)
    o.add_argument("--csv", default="-")
    o.add_argument("--json")
    o.set_defaults(func=cmd_optimize)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", required=True, choices=("precond", "gradients", "cost-tables", "flux"))
    v.add_argument("--seeds", type=int, default=50)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2, which is reserved for verification failures
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"lnks-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
