"""Seeded property suites: scalar inequality, coercivity, normalisation, bounds.

Each suite returns a CheckResult with human-readable summary lines and, on
failure, a counterexample dump.  The suites double as the acceptance
criteria for the structural properties of the discrete operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .freeboundary import (
    default_coincidence_tol,
    lewy_stampacchia_residual,
    recover_quasi_characteristic,
)
from .grid import GridFunction, build_grid, catalog_problem, make_params
from .harness import bbm_check
from .operator import apply_operator, assemble_weights, gagliardo_seminorm, make_local_operator
from .solvers import solve_vi

PINEQ_P_VALUES = (1.5, 2.0, 3.0, 4.0)
COERCIVITY_GRID = ((0.3, 2.0), (0.3, 3.0), (0.7, 2.0), (0.7, 3.0))


@dataclass
class CheckResult:
    name: str
    passed: bool
    lines: list[str] = field(default_factory=list)
    counterexample: str | None = None


def _phi(t: np.ndarray, p: float) -> np.ndarray:
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def check_pineq(seed: int = 42, n_pairs: int = 10_000, rel_slack: float = 1e-12) -> CheckResult:
    """(phi_p(a) - phi_p(b))(a - b) against its sharp lower bounds, both p ranges."""
    rng = np.random.default_rng(seed)
    res = CheckResult(name="pineq", passed=True)
    for p in PINEQ_P_VALUES:
        a = rng.uniform(-5.0, 5.0, size=n_pairs)
        b = rng.uniform(-5.0, 5.0, size=n_pairs)
        lhs = (_phi(a, p) - _phi(b, p)) * (a - b)
        if p >= 2.0:
            rhs = 2.0 ** (2.0 - p) * np.abs(a - b) ** p
        else:
            keep = (np.abs(a) + np.abs(b)) > 0.0
            a, b, lhs = a[keep], b[keep], lhs[keep]
            rhs = (p - 1.0) * np.abs(a - b) ** 2 / (np.abs(a) + np.abs(b)) ** (2.0 - p)
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        bad = lhs - rhs < -rel_slack * np.maximum(scale, 1e-300)
        worst = float(np.min(lhs - rhs))
        if np.any(bad):
            i = int(np.argmin(lhs - rhs))
            res.passed = False
            res.counterexample = f"p={p}: a={a[i]!r}, b={b[i]!r}, lhs={lhs[i]!r}, rhs={rhs[i]!r}"
        if p == 2.0:
            eq_gap = float(np.max(np.abs(lhs - rhs)))
            res.lines.append(f"p=2 equality gap {eq_gap:.3e}")
            if eq_gap > rel_slack * float(np.max(np.abs(lhs)) + 1.0):
                res.passed = False
                res.counterexample = f"p=2 equality violated, gap {eq_gap}"
        res.lines.append(f"p={p}: {len(lhs)} pairs, worst margin {worst:.3e}")
    return res


def _random_pair(rng: np.random.Generator, m: int) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=m), rng.normal(size=m)


def check_coercivity(
    seed: int = 42, n_pairs: int = 1000, n_cells: int = 64, rel_slack: float = 1e-10
) -> CheckResult:
    """Discrete strong coercivity and strict T-monotonicity on random pairs."""
    rng = np.random.default_rng(seed)
    grid = build_grid(-1.0, 1.0, n_cells)
    h = grid.h
    res = CheckResult(name="coercivity", passed=True)
    for s, p in COERCIVITY_GRID:
        w = assemble_weights(grid, make_params(s, p))
        const = 2.0 ** (1.0 - p)
        worst = math.inf
        worst_t = math.inf
        for _ in range(n_pairs):
            ui, vi = _random_pair(rng, grid.n_interior)
            u = GridFunction.from_interior(grid, ui)
            v = GridFunction.from_interior(grid, vi)
            au = apply_operator(w, u).interior
            av = apply_operator(w, v).interior
            lhs = h * float(np.sum((au - av) * (ui - vi)))
            sem = gagliardo_seminorm(w, s, p, GridFunction.from_interior(grid, ui - vi)).value
            rhs = const * sem**p
            margin = (lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
            worst = min(worst, margin)
            if margin < -rel_slack:
                res.passed = False
                res.counterexample = f"s={s}, p={p}: lhs={lhs!r} < rhs={rhs!r}"
            plus = np.maximum(ui - vi, 0.0)
            if np.any(plus > 0.0):
                tmono = h * float(np.sum((au - av) * plus))
                worst_t = min(worst_t, tmono)
                if tmono <= 0.0:
                    res.passed = False
                    res.counterexample = f"T-monotonicity failed at s={s}, p={p}: value {tmono!r}"
        res.lines.append(
            f"(s={s}, p={p}): {n_pairs} pairs, worst coercivity margin {worst:.3e}, "
            f"min T-monotone pairing {worst_t:.3e}"
        )
    return res


def check_bbm(rel_gap: float = 0.02, s_list=(0.9, 0.99, 0.999)) -> CheckResult:
    """Quadrature seminorm of the bump approaches the gradient norm as s -> 1."""
    res = CheckResult(name="bbm", passed=True)
    rep = bbm_check("bump", 2.0, s_list, rel_tol=1e-4)
    gaps = [abs(vp - rep.grad_p) / rep.grad_p for _, vp, _, _ in rep.rows]
    for (s, vp, gp, okq), gap in zip(rep.rows, gaps):
        res.lines.append(f"s={s}: quad^p={vp:.6f} grad^p={gp:.6f} gap={gap:.4f} quad_ok={okq}")
        if not okq:
            res.passed = False
            res.counterexample = f"quadrature tolerance not reached at s={s}"
    if rep.final_gap > rel_gap:
        res.passed = False
        res.counterexample = f"final gap {rep.final_gap:.4f} exceeds {rel_gap}"
    if any(b > a * (1.0 + 1e-12) for a, b in zip(gaps[:-1], gaps[1:])):
        res.passed = False
        res.counterexample = f"gaps not shrinking: {gaps}"
    res.lines.append(f"final relative gap {rep.final_gap:.4f} (target <= {rel_gap})")
    return res


def check_lewy_stampacchia(
    n_cells: int = 256,
    tol: float = 1e-8,
    s_values=(0.5, 0.9),
    p_values=(1.5, 2.0, 3.0),
    catalogs=("CAT-B", "CAT-D"),
) -> CheckResult:
    """Two-sided operator bound at the converged solution, zero and nonzero obstacle."""
    grid = build_grid(-1.0, 1.0, n_cells)
    res = CheckResult(name="lewy-stampacchia", passed=True)
    for cat in catalogs:
        problem = catalog_problem(cat, grid)
        for s in s_values:
            for p in p_values:
                op = assemble_weights(grid, make_params(s, p)) if s < 1.0 else make_local_operator(grid, p)
                rep = solve_vi(op, problem, tol=tol)
                if not rep.converged:
                    res.passed = False
                    res.counterexample = f"{cat} s={s} p={p}: solver did not converge"
                    continue
                ls = lewy_stampacchia_residual(rep, problem)
                res.lines.append(f"{cat} s={s} p={p}: ls_residual={ls:.3e} (limit {10 * tol:.1e})")
                if ls > 10.0 * tol:
                    res.passed = False
                    res.counterexample = f"{cat} s={s} p={p}: ls_residual={ls!r} > 10*tol"
    return res


def check_theta_sandwich(
    n_cells: int = 512,
    tol: float = 1e-8,
    s_values=(0.5, 0.9),
    catalogs=("CAT-B", "CAT-C"),
    p: float = 2.0,
) -> CheckResult:
    """Recovered quasi-characteristic lies in [0, 1] and is 1 on the positivity set."""
    grid = build_grid(-1.0, 1.0, n_cells)
    res = CheckResult(name="theta-sandwich", passed=True)
    tol_theta = 1e3 * tol
    for cat in catalogs:
        problem = catalog_problem(cat, grid)
        for s in s_values:
            w = assemble_weights(grid, make_params(s, p))
            rep = solve_vi(w, problem, tol=tol)
            if not rep.converged:
                res.passed = False
                res.counterexample = f"{cat} s={s}: solver did not converge"
                continue
            q = recover_quasi_characteristic(rep, tol_f=1e-3)
            theta = q.theta.values[q.valid_mask]
            lo = float(np.min(theta)) if theta.size else 0.0
            hi = float(np.max(theta)) if theta.size else 0.0
            tol_u = default_coincidence_tol(rep.u, tol, p)
            pos = q.valid_mask & (rep.u.values > tol_u)
            pos_min = float(np.min(q.theta.values[pos])) if np.any(pos) else 1.0
            res.lines.append(
                f"{cat} s={s}: theta range [{lo:.2e}, {hi:.6f}], min on positivity {pos_min:.6f}"
            )
            if lo < -tol_theta or hi > 1.0 + tol_theta:
                res.passed = False
                res.counterexample = f"{cat} s={s}: theta range [{lo!r}, {hi!r}] outside sandwich"
            if pos_min < 1.0 - tol_theta:
                res.passed = False
                res.counterexample = f"{cat} s={s}: theta={pos_min!r} below 1 on positivity set"
    return res


CHECKS = {
    "pineq": check_pineq,
    "coercivity": check_coercivity,
    "bbm": check_bbm,
    "lewy-stampacchia": check_lewy_stampacchia,
    "theta-sandwich": check_theta_sandwich,
}


def run_check(name: str, seed: int = 42) -> CheckResult:
    if name == "pineq":
        return check_pineq(seed=seed)
    if name == "coercivity":
        return check_coercivity(seed=seed)
    if name == "bbm":
        return check_bbm()
    if name == "lewy-stampacchia":
        return check_lewy_stampacchia()
    if name == "theta-sandwich":
        return check_theta_sandwich()
    raise KeyError(name)
