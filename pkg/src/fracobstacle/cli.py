"""Command-line entry point.

Subcommands: solve | sweep-eps | sweep-s | check | bbm-check.  Exit codes
are stable API: 0 success, 1 configuration error, 2 non-convergence,
3 property-suite failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checks import CHECKS, run_check
from .config import RunConfig, load_config
from .errors import ConfigurationError
from .grid import build_grid, catalog_problem, make_params
from .harness import (
    bbm_check,
    emit_report,
    fmt17,
    report_filename,
    run_eps_sweep,
    run_s_sweep,
)
from .operator import assemble_weights, make_local_operator
from .solvers import PenaltyFn, solve_penalized, solve_vi

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_PROPERTY = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracobstacle",
        description="Obstacle-problem laboratory for the fractional p-Laplacian on 1D grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized suites")

    add_common(sub.add_parser("solve", help="solve the obstacle problem (and penalized if eps set)"))
    add_common(sub.add_parser("sweep-eps", help="penalization sweep against the VI oracle"))
    add_common(sub.add_parser("sweep-s", help="fractional-order sweep against the sigma reference"))
    pc = sub.add_parser("check", help="run a named property suite")
    pc.add_argument("which", help=f"one of: {', '.join(CHECKS)}, all")
    add_common(pc)
    add_common(sub.add_parser("bbm-check", help="normalisation check of the quadrature seminorm"))
    return parser


def _operator_for(cfg: RunConfig, grid):
    if cfg.s < 1.0:
        return assemble_weights(grid, make_params(cfg.s, cfg.p))
    return make_local_operator(grid, cfg.p)


def _out_dir(cfg: RunConfig, args) -> Path:
    return Path(args.out) if args.out else Path(cfg.out_dir)


def _cmd_solve(cfg: RunConfig, args) -> int:
    grid = build_grid(cfg.a, cfg.b, cfg.n_cells)
    problem = catalog_problem(cfg.catalog, grid)
    op = _operator_for(cfg, grid)
    out = _out_dir(cfg, args)
    report = solve_vi(op, problem, tol=cfg.tol, max_sweeps=cfg.max_sweeps, omega=cfg.omega)
    wrote = []
    if cfg.out_format in ("json", "both"):
        wrote.append(emit_report(report, "json",
                                 out / report_filename(cfg.catalog, "solve", cfg.p, cfg.s, "json")))
    if cfg.out_format in ("csv", "both"):
        wrote.append(emit_report(report, "csv",
                                 out / report_filename(cfg.catalog, "solution", cfg.p, cfg.s, "csv")))
    ok = report.converged
    print(f"solve {cfg.catalog} s={cfg.s:g} p={cfg.p:g}: residual={fmt17(report.residual)} "
          f"sweeps={report.sweeps} converged={report.converged}")
    if cfg.eps is not None:
        pen = PenaltyFn(eps=cfg.eps, variant=cfg.theta_variant)
        prep = solve_penalized(op, problem, pen, tol=cfg.tol, max_sweeps=cfg.max_sweeps, omega=cfg.omega)
        wrote.append(emit_report(prep, "json",
                                 out / report_filename(cfg.catalog, "penalized", cfg.p, cfg.s, "json")))
        print(f"penalized eps={cfg.eps:g}: residual={fmt17(prep.residual)} "
              f"sweeps={prep.sweeps} converged={prep.converged}")
        ok = ok and prep.converged
    for path in wrote:
        print(f"wrote {path}")
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


def _emit_sweep(report, cfg: RunConfig, out: Path, sigma: float) -> list[Path]:
    paths = [
        emit_report(report, "csv", out / report_filename(report.problem, report.kind, cfg.p, sigma, "csv")),
        emit_report(report, "json", out / report_filename(report.problem, report.kind, cfg.p, sigma, "json")),
    ]
    return paths


def _cmd_sweep_eps(cfg: RunConfig, args) -> int:
    if not cfg.eps_list:
        raise ConfigurationError("sweep-eps requires config key penalty.eps_list")
    grid = build_grid(cfg.a, cfg.b, cfg.n_cells)
    problem = catalog_problem(cfg.catalog, grid)
    report = run_eps_sweep(
        problem, cfg.s, cfg.p, cfg.eps_list, tol=cfg.tol, max_sweeps=cfg.max_sweeps,
        theta_variant=cfg.theta_variant, warm_start=cfg.warm_start,
        window_policy=cfg.window_policy, omega=cfg.omega,
    )
    for path in _emit_sweep(report, cfg, _out_dir(cfg, args), cfg.s):
        print(f"wrote {path}")
    flagged = [row.param for row in report.rows if not row.converged]
    if flagged:
        print(f"non-converged rows at eps: {', '.join(fmt17(e) for e in flagged)}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_sweep_s(cfg: RunConfig, args) -> int:
    if not cfg.s_list:
        raise ConfigurationError("sweep-s requires config key study.s_list")
    grid = build_grid(cfg.a, cfg.b, cfg.n_cells)
    problem = catalog_problem(cfg.catalog, grid)
    report = run_s_sweep(
        problem, cfg.p, cfg.s_list, cfg.sigma, cfg.resolved_r(), tol=cfg.tol,
        max_sweeps=cfg.max_sweeps, warm_start=cfg.warm_start,
        window_policy=cfg.window_policy, omega=cfg.omega,
    )
    for path in _emit_sweep(report, cfg, _out_dir(cfg, args), cfg.sigma):
        print(f"wrote {path}")
    flagged = [row.param for row in report.rows if not row.converged]
    if flagged:
        print(f"non-converged rows at s: {', '.join(fmt17(s) for s in flagged)}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_check(cfg: RunConfig, args) -> int:
    which = args.which
    names = list(CHECKS) if which == "all" else [which]
    for name in names:
        if name not in CHECKS:
            print(f"unknown check {name!r}; expected one of: {', '.join(CHECKS)}, all", file=sys.stderr)
            return EXIT_CONFIG
    seed = args.seed if args.seed is not None else cfg.seed
    failed = False
    for name in names:
        result = run_check(name, seed=seed)
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {name}")
        for line in result.lines:
            print(f"    {line}")
        if not result.passed:
            failed = True
            print(f"    counterexample: {result.counterexample}", file=sys.stderr)
    return EXIT_PROPERTY if failed else EXIT_OK


def _cmd_bbm(cfg: RunConfig, args) -> int:
    rep = bbm_check("bump", 2.0, (0.9, 0.99, 0.999), rel_tol=1e-4)
    print("s, seminorm^p (quadrature), gradient_norm^p")
    for s, vp, gp, okq in rep.rows:
        print(f"{s:g}, {fmt17(vp)}, {fmt17(gp)}{'' if okq else '  [tol not reached]'}")
    print(f"final relative gap: {fmt17(rep.final_gap)}")
    ok = rep.final_gap <= 0.02 and all(okq for *_, okq in rep.rows)
    return EXIT_OK if ok else EXIT_PROPERTY


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            return _cmd_solve(cfg, args)
        if args.command == "sweep-eps":
            return _cmd_sweep_eps(cfg, args)
        if args.command == "sweep-s":
            return _cmd_sweep_s(cfg, args)
        if args.command == "check":
            return _cmd_check(cfg, args)
        return _cmd_bbm(cfg, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
