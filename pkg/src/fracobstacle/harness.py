"""Sweep orchestration: eps-sweeps, s-sweeps, rate fits, and report emission.

A sweep row compares one solve against a reference solve on the same grid
and records the comparison metrics in a fixed schema.  CSV output carries
exactly the columns

    param, sup_diff, lp_diff, wr_diff, d_L, d_H_coin, d_H_fb,
    theta_gap_1, theta_gap_2, ls_residual, holder_beta, sweeps

in that order; the JSON mirror adds convergence flags, per-row extras
(derived penalization bounds, full-domain set distances, threshold
sensitivities), and the rate fits.  Floats are rendered with 17 significant
digits so emitted files round-trip bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .freeboundary import (
    coincidence_set,
    default_coincidence_tol,
    free_boundary,
    hausdorff_distance,
    holder_seminorm,
    lebesgue_distance,
    lewy_stampacchia_residual,
    recover_quasi_characteristic,
    restrict_intervals,
    restrict_points,
)
from .grid import GridFunction, ProblemSpec, make_params
from .operator import (
    KernelWeights,
    OperatorHandle,
    assemble_weights,
    gagliardo_seminorm,
    gradient_norm,
    make_local_operator,
)
from .quadrature import continuum_seminorm_p, gradient_norm_p
from .solvers import PenaltyFn, SolveReport, penalty_shift, solve_penalized, solve_vi

CSV_COLUMNS = (
    "param",
    "sup_diff",
    "lp_diff",
    "wr_diff",
    "d_L",
    "d_H_coin",
    "d_H_fb",
    "theta_gap_1",
    "theta_gap_2",
    "ls_residual",
    "holder_beta",
    "sweeps",
)

HOLDER_BETA = 0.1
HOLDER_INSET = 0.05  # fraction of the domain length kept away from each end
THETA_TOL_F = 1e-3
S_SWEEP_CAP = 0.95


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    degenerate: bool = False


@dataclass(eq=False)
class MetricRow:
    param: float
    sup_diff: float
    lp_diff: float
    wr_diff: float
    d_L: float
    d_H_coin: float
    d_H_fb: float
    theta_gap_1: float
    theta_gap_2: float
    ls_residual: float
    holder_beta: float
    sweeps: int
    converged: bool = True
    extras: dict = field(default_factory=dict)


@dataclass(eq=False)
class SweepReport:
    kind: str  # "eps-sweep" or "s-sweep"
    problem: str
    fixed: dict
    rows: list[MetricRow]
    rate_fits: dict[str, RateFit] = field(default_factory=dict)


def fit_rate(rows) -> RateFit:
    """Least-squares line through (log param, log value); needs 3 positive rows."""
    pts = [(p, v) for p, v in rows if p > 0.0 and v > 0.0 and math.isfinite(v)]
    if len(pts) < 3:
        return RateFit(math.nan, math.nan, math.nan, degenerate=True)
    lx = np.log([p for p, _ in pts])
    ly = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), r2)


def trend_ok(values, allowed_inversions: int = 1) -> bool:
    """First-to-last strict decrease with at most the allowed interior upticks."""
    vals = [float(v) for v in values]
    if any(math.isnan(v) for v in vals) or len(vals) < 2:
        return False
    if not vals[-1] < vals[0]:
        return False
    ups = sum(1 for a, b in zip(vals[:-1], vals[1:]) if b > a)
    return ups <= allowed_inversions


def _theta_gap(row_rep, ref_rep, window, test_fn) -> float:
    grid = row_rep.u.grid
    qs = recover_quasi_characteristic(row_rep, tol_f=THETA_TOL_F)
    qr = recover_quasi_characteristic(ref_rep, tol_f=THETA_TOL_F)
    mask = qs.valid_mask & qr.valid_mask
    xs = grid.nodes
    if window is not None:
        lo, hi = window
        mask = mask & (xs >= lo) & (xs <= hi)
    diff = qs.theta.values - qr.theta.values
    return float(abs(grid.h * np.sum(diff[mask] * test_fn(xs[mask]))))


def _phi1(x: np.ndarray) -> np.ndarray:
    return np.cos(np.pi * x / 2.0)


def _phi2(x: np.ndarray) -> np.ndarray:
    return 1.0 - x * x


def _holder_window(grid) -> tuple[float, float]:
    inset = HOLDER_INSET * (grid.b - grid.a)
    return (grid.a + inset, grid.b - inset)


def _wr_difference(
    row_rep: SolveReport,
    ref_rep: SolveReport,
    order_spec,
    p: float,
    weights_r: KernelWeights | None,
) -> float:
    grid = row_rep.u.grid
    d = GridFunction.from_interior(grid, row_rep.u.interior - ref_rep.u.interior)
    if order_spec == "native":
        if isinstance(row_rep.op, KernelWeights):
            return gagliardo_seminorm(row_rep.op, row_rep.params.s, p, d).value
        return gradient_norm(grid, p, d)
    r = float(order_spec)
    if r == 0.0:
        return gagliardo_seminorm(grid, 0.0, p, d).value
    src = weights_r if weights_r is not None else grid
    return gagliardo_seminorm(src, r, p, d).value


def build_metric_row(
    *,
    param: float,
    row_rep: SolveReport,
    ref_rep: SolveReport,
    problem: ProblemSpec,
    p: float,
    order_spec,
    weights_r: KernelWeights | None,
    window: tuple[float, float] | None,
) -> MetricRow:
    """Comparison metrics of one solve against the reference solve."""
    grid = row_rep.u.grid
    d = row_rep.u.interior - ref_rep.u.interior
    sup_diff = float(np.max(np.abs(d))) if d.size else 0.0
    lp_diff = gagliardo_seminorm(grid, 0.0, p, GridFunction.from_interior(grid, d)).value
    wr_diff = _wr_difference(row_rep, ref_rep, order_spec, p, weights_r)

    tol_row = default_coincidence_tol(row_rep.u, max(row_rep.tol, 1e-14), p)
    tol_ref = default_coincidence_tol(ref_rep.u, max(ref_rep.tol, 1e-14), p)
    coin_row = coincidence_set(row_rep.u, tol_row)
    coin_ref = coincidence_set(ref_rep.u, tol_ref)
    fb_row = free_boundary(coin_row)
    fb_ref = free_boundary(coin_ref)

    d_L_full = lebesgue_distance(coin_row.chi, coin_ref.chi)
    dH_coin_full = hausdorff_distance(coin_row.intervals, coin_ref.intervals)
    dH_fb_full = hausdorff_distance(fb_row.points, fb_ref.points)
    if window is not None:
        d_L = lebesgue_distance(coin_row.chi, coin_ref.chi, window)
        dH_coin = hausdorff_distance(
            restrict_intervals(coin_row.intervals, window),
            restrict_intervals(coin_ref.intervals, window),
        )
        dH_fb = hausdorff_distance(
            restrict_points(fb_row.points, window), restrict_points(fb_ref.points, window)
        )
    else:
        d_L, dH_coin, dH_fb = d_L_full, dH_coin_full, dH_fb_full

    gap1 = _theta_gap(row_rep, ref_rep, window, _phi1)
    gap2 = _theta_gap(row_rep, ref_rep, window, _phi2)
    ls = lewy_stampacchia_residual(row_rep, problem)
    hol = holder_seminorm(row_rep.u, HOLDER_BETA, _holder_window(grid))

    extras = {
        "d_L_full": d_L_full,
        "d_H_coin_full": dH_coin_full,
        "d_H_fb_full": dH_fb_full,
        "residual": row_rep.residual,
    }
    # threshold sensitivity of the set metrics
    for tag, fac in (("down", 0.1), ("up", 10.0)):
        c1 = coincidence_set(row_rep.u, tol_row * fac)
        c2 = coincidence_set(ref_rep.u, tol_ref * fac)
        extras[f"d_L_tol_{tag}"] = lebesgue_distance(c1.chi, c2.chi, window)
    return MetricRow(
        param=param,
        sup_diff=sup_diff,
        lp_diff=lp_diff,
        wr_diff=wr_diff,
        d_L=d_L,
        d_H_coin=dH_coin,
        d_H_fb=dH_fb,
        theta_gap_1=gap1,
        theta_gap_2=gap2,
        ls_residual=ls,
        holder_beta=hol,
        sweeps=row_rep.sweeps,
        converged=row_rep.converged,
        extras=extras,
    )


def resolve_window(problem: ProblemSpec, policy: str) -> tuple[float, float] | None:
    """Window used for the set metrics: the nondegeneracy window when claimed."""
    if policy == "full":
        return None
    if policy == "window":
        if problem.omega is None:
            raise ConfigurationError(f"{problem.catalog_id} declares no window")
        return problem.omega
    if policy != "auto":
        raise ConfigurationError(f"unknown window policy {policy!r}")
    return problem.omega if problem.lam > 0.0 else None


def run_eps_sweep(
    problem: ProblemSpec,
    s: float,
    p: float,
    eps_list,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    *,
    theta_variant: str = "ramp",
    warm_start: bool = True,
    window_policy: str = "auto",
    omega="auto",
) -> SweepReport:
    """Penalized solves against the variational-inequality oracle at fixed (s, p)."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ConfigurationError("eps_list must be strictly decreasing")
    grid = problem.grid
    if s < 1.0:
        op: OperatorHandle = assemble_weights(grid, make_params(s, p))
    else:
        op = make_local_operator(grid, p)
    ref = solve_vi(op, problem, tol=tol, max_sweeps=max_sweeps, omega=omega)
    window = resolve_window(problem, window_policy)
    zeta = penalty_shift(op, problem)
    zeta_l1 = float(grid.h * np.sum(zeta))
    rows = []
    x0 = ref.u
    for eps in eps_list:
        pen = PenaltyFn(eps=eps, variant=theta_variant)
        rep = solve_penalized(
            op, problem, pen, tol=tol, max_sweeps=max_sweeps, omega=omega,
            x0=x0 if warm_start else None,
        )
        if warm_start:
            x0 = rep.u
        row = build_metric_row(
            param=eps, row_rep=rep, ref_rep=ref, problem=problem, p=p,
            order_spec="native", weights_r=None, window=window,
        )
        bound = 2.0 ** ((p - 1.0) / p) * (pen.C_theta * zeta_l1 * eps) ** (1.0 / p) + 4.0 * tol ** (1.0 / p)
        row.extras["bound_derived"] = bound
        row.extras["bound_margin"] = bound - row.wr_diff
        if p >= 2.0:
            row.extras["cp_paper"] = 2.0 ** (-2.0 / p) * (pen.C_theta * zeta_l1) ** (1.0 / p)
        rows.append(row)
    fits = {}
    for name in ("wr_diff", "sup_diff"):
        fits[name] = fit_rate(
            [(r.param, getattr(r, name)) for r in rows if r.converged]
        )
    fixed = {
        "catalog": problem.catalog_id,
        "s": s,
        "p": p,
        "n_cells": grid.n_cells,
        "tol": tol,
        "theta_variant": theta_variant,
        "zeta_l1": zeta_l1,
        "C_theta": PenaltyFn(eps=1.0, variant=theta_variant).C_theta,
    }
    return SweepReport(kind="eps-sweep", problem=problem.catalog_id, fixed=fixed, rows=rows, rate_fits=fits)


def run_s_sweep(
    problem: ProblemSpec,
    p: float,
    s_list,
    sigma: float,
    r: float,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    *,
    warm_start: bool = True,
    window_policy: str = "auto",
    omega="auto",
) -> SweepReport:
    """Obstacle solves at each s compared against the solve at order sigma.

    sigma = 1 uses the native local operator for the reference column; the
    difference seminorm is measured at order r < sigma.
    """
    s_list = [float(s) for s in s_list]
    if any(b <= a for a, b in zip(s_list[:-1], s_list[1:])):
        raise ConfigurationError("s_list must be strictly increasing")
    if any(not (0.0 < s <= S_SWEEP_CAP) for s in s_list):
        raise ConfigurationError(f"s values must lie in (0, {S_SWEEP_CAP}]")
    sigma = float(sigma)
    if not (0.0 < sigma <= 1.0):
        raise ConfigurationError("sigma must lie in (0, 1]")
    if not (0.0 <= r < sigma):
        raise ConfigurationError("difference order r must satisfy 0 <= r < sigma")
    grid = problem.grid
    if sigma == 1.0:
        ref_op: OperatorHandle = make_local_operator(grid, p)
    else:
        ref_op = assemble_weights(grid, make_params(sigma, p))
    ref = solve_vi(ref_op, problem, tol=tol, max_sweeps=max_sweeps, omega=omega)
    weights_r = assemble_weights(grid, make_params(r, p)) if r > 0.0 else None
    window = resolve_window(problem, window_policy)
    rows = []
    x0 = None
    for s in s_list:
        w = assemble_weights(grid, make_params(s, p))
        rep = solve_vi(w, problem, tol=tol, max_sweeps=max_sweeps, omega=omega,
                       x0=x0 if warm_start else None)
        if warm_start:
            x0 = rep.u
        rows.append(
            build_metric_row(
                param=s, row_rep=rep, ref_rep=ref, problem=problem, p=p,
                order_spec=r, weights_r=weights_r, window=window,
            )
        )
    fits = {}
    for name in ("sup_diff", "wr_diff", "d_L", "d_H_fb"):
        fits[name] = fit_rate(
            [(sigma - row.param, getattr(row, name)) for row in rows if row.converged]
        )
    fixed = {
        "catalog": problem.catalog_id,
        "p": p,
        "sigma": sigma,
        "r": r,
        "n_cells": grid.n_cells,
        "tol": tol,
        "window": list(window) if window is not None else None,
    }
    return SweepReport(kind="s-sweep", problem=problem.catalog_id, fixed=fixed, rows=rows, rate_fits=fits)


@dataclass(eq=False)
class BbmReport:
    catalog_fn: str
    p: float
    grad_p: float
    rows: list[tuple[float, float, float, bool]]  # (s, quad^p, grad^p, reached_tol)
    final_gap: float


def bbm_check(catalog_fn: str, p: float, s_list, rel_tol: float = 1e-4) -> BbmReport:
    """Continuum seminorm values against the closed-form gradient norm as s -> 1."""
    grad = gradient_norm_p(catalog_fn, p)
    rows = []
    for s in s_list:
        vp, rel = continuum_seminorm_p(catalog_fn, float(s), p, rel_tol)
        rows.append((float(s), vp, grad, bool(rel <= rel_tol)))
    final_gap = abs(rows[-1][1] - grad) / abs(grad)
    return BbmReport(catalog_fn=catalog_fn, p=p, grad_p=grad, rows=rows, final_gap=final_gap)


def fmt17(x) -> str:
    """17-significant-digit rendering; round-trips doubles exactly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _json_render(obj, indent: int = 0) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  "{k}": {_json_render(v, indent + 2)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_json_render(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return fmt17(x)
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {type(obj)!r}")


def json_dumps(obj) -> str:
    return _json_render(obj) + "\n"


def _row_dict(row: MetricRow) -> dict:
    d = {name: getattr(row, name) for name in CSV_COLUMNS}
    d["converged"] = row.converged
    d["extras"] = dict(row.extras)
    return d


def sweep_to_json_obj(report: SweepReport) -> dict:
    return {
        "kind": report.kind,
        "problem": report.problem,
        "fixed": dict(report.fixed),
        "rows": [_row_dict(r) for r in report.rows],
        "rate_fits": {
            k: {
                "slope": v.slope,
                "intercept": v.intercept,
                "r_squared": v.r_squared,
                "degenerate": v.degenerate,
            }
            for k, v in report.rate_fits.items()
        },
    }


def sweep_to_csv(report: SweepReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        cells = []
        for name in CSV_COLUMNS:
            val = getattr(row, name)
            cells.append(str(int(val)) if name == "sweeps" else fmt17(val))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def solve_to_json_obj(report: SolveReport) -> dict:
    obj = {
        "params": {"s": report.params.s, "p": report.params.p},
        "eps": report.eps,
        "residual": report.residual,
        "sweeps": report.sweeps,
        "converged": report.converged,
        "u": [float(v) for v in report.u.values],
        "operator": [float(v) for v in report.operator_values.values],
    }
    tol_u = default_coincidence_tol(report.u, max(report.tol, 1e-14), report.params.p)
    coin = coincidence_set(report.u, tol_u)
    fb = free_boundary(coin)
    obj["coincidence_intervals"] = [[a, b] for a, b in coin.intervals]
    obj["free_boundary"] = [float(x) for x in fb.points]
    return obj


def grid_function_csv(u: GridFunction) -> str:
    lines = ["index,x,value"]
    for i, (x, v) in enumerate(zip(u.grid.nodes, u.values)):
        lines.append(f"{i},{fmt17(x)},{fmt17(v)}")
    return "\n".join(lines) + "\n"


def report_filename(catalog: str, kind: str, p: float, sigma: float, ext: str) -> str:
    return f"{catalog}_{kind}_{p:g}_{sigma:g}.{ext}"


def emit_report(report, fmt: str, path) -> Path:
    """Write a sweep or solve report to disk; CSV columns are schema-pinned."""
    path = Path(path)
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"unknown report format {fmt!r}")
    if isinstance(report, SweepReport):
        text = sweep_to_csv(report) if fmt == "csv" else json_dumps(sweep_to_json_obj(report))
    elif isinstance(report, SolveReport):
        text = grid_function_csv(report.u) if fmt == "csv" else json_dumps(solve_to_json_obj(report))
    else:
        raise ConfigurationError(f"cannot emit report of type {type(report)!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"failed writing report to {path}: {exc}") from exc
    return path
