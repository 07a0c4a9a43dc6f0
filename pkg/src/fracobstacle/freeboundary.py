"""Coincidence sets, free boundaries, quasi-characteristic functions, set metrics.

The coincidence indicator lives on interior nodes; free-boundary points are
midpoints of edges between consecutive interior nodes where the indicator
changes.  Edges touching the Dirichlet nodes are excluded: the function is
zero outside the domain by convention, so a coincidence run that reaches
the boundary continues outside and contributes no boundary point of the
coincidence set inside the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridMismatchError
from .grid import GridFunction, ProblemSpec, pos_neg_split
from .operator import apply_operator
from .solvers import SolveReport

SetLike = "sequence of floats (points) and/or (lo, hi) pairs (intervals)"


@dataclass(frozen=True, eq=False)
class CoincidenceSet:
    """Nodes where the solution sits on the obstacle, within tolerance tol_u."""

    tol_u: float
    indices: np.ndarray  # node indices, ascending
    intervals: list[tuple[float, float]]
    chi: GridFunction


@dataclass(frozen=True, eq=False)
class FreeBoundary:
    points: np.ndarray  # sorted, strictly inside the domain


@dataclass(frozen=True, eq=False)
class QuasiCharacteristic:
    theta: GridFunction
    valid_mask: np.ndarray  # True where f^- exceeds tol_f


@dataclass(frozen=True, eq=False)
class GrowthReport:
    C1_hat: float
    growth_exponent: float
    samples: list[tuple[float, float, float, float]]  # (z, r, sup_ball, r^exponent)


def default_coincidence_tol(u: GridFunction, solver_tol: float, p: float) -> float:
    """Threshold scaling with the solver tolerance through the detachment exponent."""
    rel = max(10.0 * solver_tol ** (1.0 / (p - 1.0)), 1e-6)
    return max(rel * u.sup_norm(), 1e-10)


def coincidence_set(u: GridFunction, tol_u: float) -> CoincidenceSet:
    """Interior nodes with u <= tol_u, grouped into maximal cell intervals."""
    if tol_u <= 0.0:
        raise ConfigurationError("tol_u must be positive")
    grid = u.grid
    inner = u.interior
    mask = inner <= tol_u
    idx = np.nonzero(mask)[0] + 1  # node indices
    intervals: list[tuple[float, float]] = []
    if idx.size:
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [idx.size - 1]))
        half = grid.h / 2.0
        for s0, e0 in zip(starts, ends):
            intervals.append((grid.nodes[idx[s0]] - half, grid.nodes[idx[e0]] + half))
    chi_vals = np.zeros(grid.n_cells + 1)
    chi_vals[idx] = 1.0
    return CoincidenceSet(tol_u=tol_u, indices=idx, intervals=intervals, chi=GridFunction(grid, chi_vals))


def free_boundary(coin: CoincidenceSet) -> FreeBoundary:
    """Edge midpoints between consecutive interior nodes where chi flips."""
    grid = coin.chi.grid
    chi = coin.chi.values
    pts = []
    for i in range(1, grid.n_cells - 1):
        if chi[i] != chi[i + 1]:
            pts.append(0.5 * (grid.nodes[i] + grid.nodes[i + 1]))
    return FreeBoundary(points=np.asarray(pts))


def _normalize_set(elements) -> np.ndarray:
    """To an (n, 2) array of closed intervals; points become degenerate intervals."""
    rows = []
    for el in elements:
        if np.isscalar(el):
            x = float(el)
            rows.append((x, x))
        else:
            lo, hi = float(el[0]), float(el[1])
            if hi < lo:
                lo, hi = hi, lo
            rows.append((lo, hi))
    if not rows:
        return np.empty((0, 2))
    arr = np.array(sorted(rows))
    return arr


def _merge(arr: np.ndarray) -> np.ndarray:
    if arr.shape[0] <= 1:
        return arr
    merged = [list(arr[0])]
    for lo, hi in arr[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return np.array(merged)


def _dist_to_set(x: float, merged: np.ndarray) -> float:
    best = math.inf
    for lo, hi in merged:
        if x < lo:
            best = min(best, lo - x)
        elif x > hi:
            best = min(best, x - hi)
        else:
            return 0.0
    return best


def _directed_hausdorff(a: np.ndarray, b_merged: np.ndarray) -> float:
    # d(., B) is piecewise linear with local maxima only at gap midpoints of B,
    # so per A-interval it suffices to test the endpoints and interior gap midpoints.
    candidates: list[float] = []
    gaps = [
        0.5 * (b_merged[i, 1] + b_merged[i + 1, 0]) for i in range(b_merged.shape[0] - 1)
    ]
    best = 0.0
    for lo, hi in a:
        candidates = [lo, hi] + [g for g in gaps if lo < g < hi]
        for x in candidates:
            d = _dist_to_set(x, b_merged)
            if d > best:
                best = d
    return best


def hausdorff_distance(A, B) -> float:
    """Exact Hausdorff distance between finite unions of points and intervals.

    One empty operand gives +inf (so degraded sweeps fail loudly); two empty
    operands give 0.
    """
    a = _merge(_normalize_set(A))
    b = _merge(_normalize_set(B))
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    if a.shape[0] == 0 or b.shape[0] == 0:
        return math.inf
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


def lebesgue_distance(
    chiA: GridFunction, chiB: GridFunction, window: tuple[float, float] | None = None
) -> float:
    """h times the number of interior nodes where the indicators disagree."""
    if not chiA.grid.same_layout(chiB.grid):
        raise GridMismatchError("indicator functions live on different grids")
    grid = chiA.grid
    diff = chiA.interior != chiB.interior
    if window is not None:
        lo, hi = window
        xs = grid.interior_nodes
        diff = diff & (xs >= lo) & (xs <= hi)
    return float(grid.h * np.count_nonzero(diff))


def recover_quasi_characteristic(
    report: SolveReport, tol_f: float = 1e-3, tol_u: float | None = None
) -> QuasiCharacteristic:
    """theta = (f^+ - A u) / f^- where f^- is resolvable; 1 on the positivity set.

    Values are not clamped: departures from [0, 1] are diagnostics, not noise
    to be masked.
    """
    if report.problem is None:
        raise ConfigurationError("quasi-characteristic recovery needs an obstacle-problem report")
    grid = report.u.grid
    f_plus, f_minus = pos_neg_split(report.problem.f)
    if tol_u is None:
        tol_u = default_coincidence_tol(report.u, max(report.residual, 1e-14), report.params.p)
    fp = f_plus.interior
    fm = f_minus.interior
    au = report.operator_values.interior
    valid = fm > tol_f
    theta_int = np.zeros(grid.n_interior)
    theta_int[valid] = (fp[valid] - au[valid]) / fm[valid]
    pos = (~valid) & (report.u.interior > tol_u)
    theta_int[pos] = 1.0
    mask = np.zeros(grid.n_cells + 1, dtype=bool)
    mask[1:-1] = valid
    return QuasiCharacteristic(theta=GridFunction.from_interior(grid, theta_int), valid_mask=mask)


def holder_seminorm(u: GridFunction, beta: float, window: tuple[float, float]) -> float:
    """max over node pairs in the window of |u_i - u_j| / |x_i - x_j|^beta."""
    if not (0.0 < beta <= 1.0):
        raise ConfigurationError(f"beta must lie in (0, 1], got {beta}")
    grid = u.grid
    lo, hi = window
    if lo < grid.a or hi > grid.b or lo >= hi:
        raise ConfigurationError(f"window {window} is not inside the domain")
    sel = (grid.nodes >= lo) & (grid.nodes <= hi)
    xs = grid.nodes[sel]
    vs = u.values[sel]
    if xs.size < 2:
        return 0.0
    dx = np.abs(xs[:, None] - xs[None, :])
    dv = np.abs(vs[:, None] - vs[None, :])
    iu = np.triu_indices(xs.size, k=1)
    return float(np.max(dv[iu] / dx[iu] ** beta))


def growth_check(
    u: GridFunction,
    coin: CoincidenceSet,
    r_list,
    p: float = 2.0,
) -> GrowthReport:
    """Detachment growth samples sup_{B_r(z)} u >= C1 r^(p/(p-1)) near the free boundary."""
    grid = u.grid
    expo = p / (p - 1.0)
    tol_u = coin.tol_u
    inner = u.interior
    pos = inner > tol_u
    if not np.any(pos) or coin.indices.size == 0:
        return GrowthReport(C1_hat=math.nan, growth_exponent=expo, samples=[])
    # free-boundary-adjacent nodes on the positive side
    zs: list[float] = []
    chi = coin.chi.values
    for i in range(1, grid.n_cells - 1):
        if chi[i] != chi[i + 1]:
            node = i if chi[i] == 0.0 else i + 1
            if inner[node - 1] > tol_u:
                zs.append(grid.nodes[node])
    zs = sorted(set(zs))
    xs = grid.interior_nodes
    samples: list[tuple[float, float, float, float]] = []
    c1 = math.inf
    for z in zs:
        for r in r_list:
            r = float(r)
            if z - r <= grid.a or z + r >= grid.b:
                continue
            ball = np.abs(xs - z) <= r
            vals = inner[ball & pos]
            if vals.size == 0:
                continue
            sup_ball = float(np.max(vals))
            bound = r**expo
            samples.append((z, r, sup_ball, bound))
            c1 = min(c1, sup_ball / bound)
    if not samples:
        return GrowthReport(C1_hat=math.nan, growth_exponent=expo, samples=[])
    return GrowthReport(C1_hat=c1, growth_exponent=expo, samples=samples)


def growth_exponent_fit(report: GrowthReport) -> float:
    """Median over detachment nodes of the log-log slope of sup_ball vs r."""
    by_z: dict[float, list[tuple[float, float]]] = {}
    for z, r, sup_ball, _ in report.samples:
        if sup_ball > 0.0:
            by_z.setdefault(z, []).append((r, sup_ball))
    slopes = []
    for rows in by_z.values():
        if len(rows) >= 3:
            rs = np.log([r for r, _ in rows])
            vs = np.log([v for _, v in rows])
            slopes.append(float(np.polyfit(rs, vs, 1)[0]))
    if not slopes:
        return math.nan
    return float(np.median(slopes))


def lewy_stampacchia_residual(report: SolveReport, problem: ProblemSpec) -> float:
    """Violation of f <= A u <= f v A psi at the report's solution, 0 when clean."""
    if report.op is None:
        raise ConfigurationError("report carries no operator handle")
    op = report.op
    psi0 = GridFunction.from_interior(op.grid, problem.psi.interior)
    a_psi = apply_operator(op, psi0).interior
    f = problem.f.interior
    au = report.operator_values.interior
    upper = np.maximum(f, a_psi)
    viol = np.maximum(np.maximum(f - au, au - upper), 0.0)
    return float(np.max(viol))


def restrict_intervals(
    intervals: list[tuple[float, float]], window: tuple[float, float]
) -> list[tuple[float, float]]:
    lo, hi = window
    out = []
    for a, b in intervals:
        c, d = max(a, lo), min(b, hi)
        if c <= d:
            out.append((c, d))
    return out


def restrict_points(points: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    pts = np.asarray(points, dtype=float)
    return pts[(pts >= lo) & (pts <= hi)]
