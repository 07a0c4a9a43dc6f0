"""Obstacle, penalized, and semilinear solvers built on nodewise monotone sweeps.

The base iteration is cyclic nodewise exact minimisation (projected
nonlinear Gauss-Seidel): every nodal subproblem is strictly increasing in
the trial value, solved in closed form for p = 2 and by bracketed Illinois
iteration otherwise, then projected onto the admissible half-line.  Plain
Gauss-Seidel stalls on fine grids (the sweep count grows like the operator
condition number), so updates are over-relaxed with a factor chosen from a
Rayleigh estimate of the smoothest-mode Jacobi radius; omega = 1 recovers
the plain method and a deterministic safeguard shrinks omega toward 1
whenever the residual stalls.  Sweeps are strictly sequential in ascending
node order, so runs with identical inputs are bit-reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import kernels
from .errors import ConfigurationError, GridMismatchError
from .grid import FractionalParams, GridFunction, ProblemSpec, pos_neg_split
from .operator import (
    KernelWeights,
    LocalOperator,
    OperatorHandle,
    apply_operator,
)

SEMILINEAR_G_IDS = ("penalty", "linear-decay", "none")


def _smoothstep_sup() -> float:
    # sup_{t>0} (1 - theta(t)) t for theta = 3t^2 - 2t^3 on (0,1), by golden section
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    f = lambda t: (1.0 - (3.0 * t * t - 2.0 * t**3)) * t
    a, b = 0.0, 1.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    for _ in range(200):
        if f(c) > f(d):
            b, d = d, c
            c = b - phi * (b - a)
        else:
            a, c = c, d
            d = a + phi * (b - a)
    t = 0.5 * (a + b)
    return f(t)


_C_THETA = {"ramp": 0.25, "smoothstep": None}


@dataclass(frozen=True)
class PenaltyFn:
    """Bounded penalty theta_eps(t) = theta(t / eps).

    The default ramp clamps t to [0, 1]; the smoothstep variant is a config
    switch for checking that limits do not depend on the choice of theta.
    Both satisfy theta(t) = 0 for t <= 0, theta nondecreasing with values
    in [0, 1], and sup (1 - theta(t)) t = C_theta.
    """

    eps: float
    variant: str = "ramp"
    C_theta: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if self.eps <= 0.0:
            raise ConfigurationError(f"penalty eps must be positive, got {self.eps}")
        if self.variant not in ("ramp", "smoothstep"):
            raise ConfigurationError(f"unknown theta variant {self.variant!r}")
        c = _C_THETA[self.variant]
        if c is None:
            c = _smoothstep_sup()
            _C_THETA[self.variant] = c
        object.__setattr__(self, "C_theta", c)

    @property
    def pen_code(self) -> int:
        return 1 if self.variant == "ramp" else 2

    def theta(self, t: np.ndarray) -> np.ndarray:
        tau = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        if self.variant == "ramp":
            return tau
        return tau * tau * (3.0 - 2.0 * tau)

    def theta_eps(self, t: np.ndarray) -> np.ndarray:
        return self.theta(np.asarray(t, dtype=float) / self.eps)


@dataclass(eq=False)
class SolveReport:
    """Converged (or last-iterate) state of one solve."""

    u: GridFunction
    operator_values: GridFunction
    residual: float
    sweeps: int
    converged: bool
    wall_time: float
    params: FractionalParams
    problem: ProblemSpec | None
    eps: float | None = None
    op: OperatorHandle | None = None
    tol: float = 0.0


OmegaSpec = Union[str, float]


def _omega_auto(op: OperatorHandle) -> float:
    grid = op.grid
    m = grid.n_interior
    if isinstance(op, LocalOperator):
        return 2.0 / (1.0 + math.sin(math.pi / grid.n_cells))
    w = op
    rowe = w.row_sums_effective()
    D = grid.h * rowe + w.tails
    v = np.sin(np.pi * np.arange(1, m + 1) / (m + 1))
    Kv = w.k @ v
    Kv[:-1] += w.near_weight * v[1:]
    Kv[1:] += w.near_weight * v[:-1]
    Av = D * v - grid.h * Kv
    lam = float(v @ Av) / float(v @ (D * v))
    mu = max(0.0, 1.0 - lam)
    om = 2.0 / (1.0 + math.sqrt(max(1e-30, 1.0 - mu * mu)))
    return min(1.999, max(1.0, om))


def _resolve_omega(op: OperatorHandle, omega: OmegaSpec) -> float:
    if omega == "auto":
        return _omega_auto(op)
    om = float(omega)
    if not (0.0 < om < 2.0):
        raise ConfigurationError(f"relaxation factor must lie in (0, 2), got {om}")
    return om


class _Engine:
    """State for one solve: kernel dispatch, residual evaluation, safeguard."""

    def __init__(
        self,
        op: OperatorHandle,
        lower: np.ndarray,
        rhs: np.ndarray,
        pen_code: int,
        zeta: np.ndarray,
        shift: np.ndarray,
        eps: float,
        vi_mode: bool,
        tol: float,
        omega: float,
    ) -> None:
        self.op = op
        self.grid = op.grid
        self.h = self.grid.h
        p = op.params.p
        self.pcode, self.pm1 = kernels.pcode_of(p)
        self.lower = np.ascontiguousarray(lower, dtype=float)
        self.rhs = np.ascontiguousarray(rhs, dtype=float)
        self.pen_code = pen_code
        self.zeta = np.ascontiguousarray(zeta, dtype=float)
        self.shift = np.ascontiguousarray(shift, dtype=float)
        self.eps = float(eps)
        self.vi_mode = vi_mode
        self.inner_tol = 0.01 * tol
        self.omega = omega
        self.nonlocal_ = isinstance(op, KernelWeights)
        self.linear_path = self.pcode == 0 and pen_code in (0, 1, 3)
        if self.nonlocal_:
            self.cop = op.cop
            self.K = op.k
            self.ncw = op.near_weight
            self.T = op.tails
            if self.linear_path:
                self.D = self.h * op.row_sums_effective() + self.T
        m = self.grid.n_interior
        self.hint = np.full(m, 1e-4)
        self.R = np.zeros(m)
        self.check_every = 2 if (self.linear_path or not self.nonlocal_) else 8

    def refresh_cache(self, u: np.ndarray) -> None:
        if self.nonlocal_ and self.linear_path:
            R = self.K @ u
            R[:-1] += self.ncw * u[1:]
            R[1:] += self.ncw * u[:-1]
            self.R = R

    def sweep(self, u: np.ndarray) -> float:
        if self.nonlocal_:
            if self.linear_path:
                return kernels.sweep_nl_lin(
                    self.K, self.ncw, self.T, self.R, u, self.lower, self.rhs, self.h,
                    self.cop, self.D, self.pen_code, self.zeta, self.shift, self.eps, self.omega,
                )
            return kernels.sweep_nl_gen(
                self.K, self.ncw, self.T, u, self.lower, self.rhs, self.h, self.cop,
                self.pcode, self.pm1, self.pen_code, self.zeta, self.shift, self.eps,
                self.omega, self.inner_tol, self.hint,
            )
        if self.linear_path:
            return kernels.sweep_loc_lin(
                u, self.lower, self.rhs, self.h, self.pen_code, self.zeta, self.shift,
                self.eps, self.omega,
            )
        return kernels.sweep_loc_gen(
            u, self.lower, self.rhs, self.h, self.pcode, self.pm1, self.pen_code,
            self.zeta, self.shift, self.eps, self.omega, self.inner_tol, self.hint,
        )

    def residual(self, u: np.ndarray) -> float:
        vi = 1 if self.vi_mode else 0
        pen_code = 0 if self.vi_mode else self.pen_code
        if self.nonlocal_:
            res = kernels.residual_nl(
                self.K, self.ncw, self.T, u, self.lower, self.rhs, self.h, self.cop,
                self.pcode, self.pm1, pen_code, self.zeta, self.shift, self.eps, vi,
            )
        else:
            res = kernels.residual_loc(
                u, self.lower, self.rhs, self.h, self.pcode, self.pm1, pen_code,
                self.zeta, self.shift, self.eps, vi,
            )
        return float(res)


_ADAPT_WINDOW = 120  # sweeps between measured-rate relaxation updates


def _young_omega(rho: float, omega: float) -> float:
    """Next relaxation factor from the measured asymptotic rate (Young's relation)."""
    if not (0.0 < rho < 1.0):
        return omega
    mu = (rho + omega - 1.0) / (omega * math.sqrt(rho))
    if mu >= 1.0:
        # rate too close to 1 to resolve the Jacobi radius: push toward 2
        return omega + 0.5 * (1.999 - omega)
    if mu <= 0.0:
        return omega
    return 2.0 / (1.0 + math.sqrt(1.0 - mu * mu))


def _run(engine: _Engine, u: np.ndarray, tol: float, max_sweeps: int) -> tuple[float, int, bool]:
    engine.refresh_cache(u)
    res = engine.residual(u)
    if res <= tol:
        return res, 0, True
    sweeps = 0
    best = res
    diverging = 0
    since_best = 0
    anchor_res = res
    anchor_sweeps = 0
    ceiling = 1.999  # lowered below any omega that provoked oscillation
    shrink_events = 0
    locked = False
    while sweeps < max_sweeps:
        engine.sweep(u)
        sweeps += 1
        if sweeps % engine.check_every == 0 or sweeps == 1:
            engine.refresh_cache(u)
            res = engine.residual(u)
            if res <= tol:
                return res, sweeps, True
            # oscillation safeguard: over-relaxed sweeps can chatter at the
            # free boundary (worst for p < 2, where the nodal slopes are
            # unbounded); after repeated events lock into the plain monotone
            # omega = 1 endgame, which settles the remaining localized error
            if res < best:
                best = res
                since_best = 0
            else:
                since_best += 1
            diverging = diverging + 1 if res > 2.0 * best else 0
            if (not locked) and engine.omega > 1.0 and sweeps >= 160 and (
                diverging >= 5 or since_best >= 3000
            ):
                shrink_events += 1
                ceiling = max(1.0, min(ceiling, engine.omega) * 0.997)
                if shrink_events >= 2:
                    engine.omega = 1.0
                    locked = True
                else:
                    engine.omega = max(1.0, 1.0 + (engine.omega - 1.0) * 0.7)
                diverging = 0
                since_best = 0
                best = res
                anchor_res, anchor_sweeps = res, sweeps
            # measured-rate adaptation: if progress is steady but slow, re-tune
            # omega from the observed per-sweep contraction factor, staying
            # under the oscillation ceiling
            elif (not locked) and sweeps - anchor_sweeps >= _ADAPT_WINDOW:
                if 0.0 < res < anchor_res:
                    rho = (res / anchor_res) ** (1.0 / (sweeps - anchor_sweeps))
                    if rho > engine.omega - 1.0 + 1e-3:
                        engine.omega = min(ceiling, max(engine.omega, _young_omega(rho, engine.omega)))
                anchor_res, anchor_sweeps = res, sweeps
    engine.refresh_cache(u)
    return engine.residual(u), sweeps, False


def _start_iterate(problem: ProblemSpec, x0: GridFunction | np.ndarray | None) -> np.ndarray:
    if x0 is None:
        return np.maximum(problem.psi.interior, 0.0).copy()
    if isinstance(x0, GridFunction):
        return x0.interior.copy()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.grid.n_interior,):
        raise GridMismatchError("starting iterate has the wrong number of interior values")
    return x0.copy()


def _check_grids(op: OperatorHandle, problem: ProblemSpec) -> None:
    if not op.grid.same_layout(problem.grid):
        raise GridMismatchError("operator and problem live on different grids")


def _dense_matrix_p2(w: KernelWeights) -> np.ndarray:
    cop = w.cop
    h = w.grid.h
    M = (-cop * h) * w.k
    m = M.shape[0]
    idx = np.arange(m - 1)
    M[idx, idx + 1] -= cop * h * w.near_weight
    M[idx + 1, idx] -= cop * h * w.near_weight
    np.fill_diagonal(M, cop * (h * w.row_sums_effective() + w.tails))
    return M


def _bootstrap_vi_p2(w: KernelWeights, problem: ProblemSpec, x0: np.ndarray) -> np.ndarray:
    """Policy-iteration warm start for the p = 2 obstacle problem.

    The p = 2 operator matrix is a Stieltjes M-matrix, so active-set policy
    iteration on the complementarity system converges in a handful of dense
    solves.  Used only to seed the nodewise sweeps near s = 1, where their
    free-boundary settlement is slow; the sweeps still certify the residual.
    """
    M = _dense_matrix_p2(w)
    f = problem.f.interior
    psi = problem.psi.interior
    active = x0 <= psi
    u = np.maximum(x0, psi)
    for _ in range(60):
        free = ~active
        u = psi.copy()
        if free.any():
            MFF = M[np.ix_(free, free)]
            rhs = f[free] - M[np.ix_(free, active)] @ psi[active]
            u[free] = np.linalg.solve(MFF, rhs)
        g = M @ u - f
        new_active = np.where(active, g > 0.0, u < psi)
        if np.array_equal(new_active, active):
            break
        active = new_active
    return np.maximum(u, psi)


def _finish(
    op: OperatorHandle,
    problem: ProblemSpec | None,
    u_int: np.ndarray,
    residual: float,
    sweeps: int,
    converged: bool,
    t0: float,
    eps: float | None,
    tol: float,
) -> SolveReport:
    u = GridFunction.from_interior(op.grid, u_int)
    Au = apply_operator(op, u)
    return SolveReport(
        u=u,
        operator_values=Au,
        residual=residual,
        sweeps=sweeps,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        params=op.params,
        problem=problem,
        eps=eps,
        op=op,
        tol=tol,
    )


def solve_vi(
    op: OperatorHandle,
    problem: ProblemSpec,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    *,
    omega: OmegaSpec = "auto",
    x0: GridFunction | np.ndarray | None = None,
    bootstrap: bool = True,
) -> SolveReport:
    """Solve the discrete obstacle problem u >= psi, A(u) >= f, complementarity.

    The iterate minimises the strictly convex energy nodewise; convergence is
    declared when the complementarity residual
    max_i |min(u_i - psi_i, (Au)_i - f_i)| drops below tol.  For the
    nonlocal p = 2 case the sweeps are seeded by a direct active-set solve
    (see _bootstrap_vi_p2); pass bootstrap=False for the pure sweep path.
    """
    if tol <= 0.0:
        raise ConfigurationError("tol must be positive")
    _check_grids(op, problem)
    t0 = time.perf_counter()
    m = op.grid.n_interior
    zeros = np.zeros(m)
    engine = _Engine(
        op, problem.psi.interior, problem.f.interior, 0, zeros, zeros, 1.0, True,
        tol, _resolve_omega(op, omega),
    )
    u = _start_iterate(problem, x0)
    np.maximum(u, problem.psi.interior, out=u)
    if bootstrap and isinstance(op, KernelWeights) and op.params.p == 2.0:
        u = _bootstrap_vi_p2(op, problem, u)
    res, sweeps, ok = _run(engine, u, tol, max_sweeps)
    return _finish(op, problem, u, res, sweeps, ok, t0, None, tol)


def penalty_shift(op: OperatorHandle, problem: ProblemSpec) -> np.ndarray:
    """zeta = ((A psi) - f)^+ on interior nodes, with psi extended by zero."""
    psi0 = GridFunction.from_interior(op.grid, problem.psi.interior)
    a_psi = apply_operator(op, psi0)
    return np.maximum(a_psi.interior - problem.f.interior, 0.0)


def solve_penalized(
    op: OperatorHandle,
    problem: ProblemSpec,
    pen: PenaltyFn,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    *,
    omega: OmegaSpec = "auto",
    x0: GridFunction | np.ndarray | None = None,
) -> SolveReport:
    """Solve A(u) + zeta * theta_eps(u - psi) = f + zeta.

    For the zero obstacle, zeta reduces to f^- and the equation to the
    bounded-penalization form A(u) + f^- theta_eps(u) = f^+.  Each nodal
    equation is strictly increasing, hence has a unique root; convergence is
    measured by the max-norm residual of the full nonlinear system.
    """
    if tol <= 0.0:
        raise ConfigurationError("tol must be positive")
    _check_grids(op, problem)
    t0 = time.perf_counter()
    zeta = penalty_shift(op, problem)
    rhs = problem.f.interior + zeta
    engine = _Engine(
        op, problem.psi.interior, rhs, pen.pen_code, zeta, problem.psi.interior,
        pen.eps, False, tol, _resolve_omega(op, omega),
    )
    u = _start_iterate(problem, x0)
    np.maximum(u, problem.psi.interior, out=u)
    res, sweeps, ok = _run(engine, u, tol, max_sweeps)
    return _finish(op, problem, u, res, sweeps, ok, t0, pen.eps, tol)


def solve_semilinear(
    op: OperatorHandle,
    g: GridFunction,
    G_id: str = "none",
    G_params: dict | None = None,
    tol: float = 1e-8,
    max_sweeps: int = 100_000,
    *,
    omega: OmegaSpec = "auto",
    x0: GridFunction | np.ndarray | None = None,
) -> SolveReport:
    """Solve A(u) = g + G(u) for a monotone nonincreasing catalog nonlinearity G.

    G_id 'none' gives the plain Dirichlet problem, 'linear-decay' the term
    G(z) = -c z with c >= 0, and 'penalty' the term G(z) = -f_minus * theta_eps(z)
    (the penalized obstacle problem is the instance g = f^+, G = penalty).
    """
    if tol <= 0.0:
        raise ConfigurationError("tol must be positive")
    if not op.grid.same_layout(g.grid):
        raise GridMismatchError("forcing does not match the operator grid")
    if G_id not in SEMILINEAR_G_IDS:
        raise ConfigurationError(
            f"unknown semilinear family {G_id!r}; expected one of {', '.join(SEMILINEAR_G_IDS)}"
        )
    params = G_params or {}
    t0 = time.perf_counter()
    m = op.grid.n_interior
    zeros = np.zeros(m)
    lower = np.full(m, kernels.NO_LOWER)
    eps = 1.0
    pen_code = 0
    zeta = zeros
    if G_id == "linear-decay":
        c = float(params.get("c", 0.0))
        if c < 0.0:
            raise ConfigurationError("linear-decay coefficient c must be >= 0 (monotonicity)")
        pen_code = 3
        zeta = np.full(m, c)
    elif G_id == "penalty":
        if "f_minus" not in params or "eps" not in params:
            raise ConfigurationError("penalty family needs G_params {'f_minus': GridFunction, 'eps': float}")
        fm = params["f_minus"]
        if np.any(fm.interior < 0.0):
            raise ConfigurationError("penalty coefficient f_minus must be nonnegative")
        pen = PenaltyFn(eps=float(params["eps"]), variant=params.get("variant", "ramp"))
        pen_code = pen.pen_code
        eps = pen.eps
        zeta = fm.interior
    engine = _Engine(
        op, lower, g.interior, pen_code, zeta, zeros, eps, False, tol,
        _resolve_omega(op, omega),
    )
    u = np.zeros(m) if x0 is None else _start_iterate_free(op, x0)
    res, sweeps, ok = _run(engine, u, tol, max_sweeps)
    return _finish(op, None, u, res, sweeps, ok, t0, None, tol)


def _start_iterate_free(op: OperatorHandle, x0: GridFunction | np.ndarray) -> np.ndarray:
    if isinstance(x0, GridFunction):
        return x0.interior.copy()
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (op.grid.n_interior,):
        raise GridMismatchError("starting iterate has the wrong number of interior values")
    return x0.copy()


def complementarity_residual(op: OperatorHandle, u: GridFunction, problem: ProblemSpec) -> float:
    """max_i |min(u_i - psi_i, (Au)_i - f_i)| over interior nodes."""
    Au = apply_operator(op, GridFunction.from_interior(op.grid, u.interior))
    g = Au.interior - problem.f.interior
    slack = u.interior - problem.psi.interior
    return float(np.max(np.abs(np.minimum(slack, g))))


def penalized_residual(op: OperatorHandle, report: SolveReport, pen: PenaltyFn) -> float:
    """Max-norm residual of the penalized system at the report's iterate."""
    problem = report.problem
    zeta = penalty_shift(op, problem)
    Au = apply_operator(op, report.u)
    g = Au.interior + zeta * pen.theta_eps(report.u.interior - problem.psi.interior)
    return float(np.max(np.abs(g - problem.f.interior - zeta)))
