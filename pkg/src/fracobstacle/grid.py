"""1D computational domain, grid functions, fractional parameters, problem catalog.

Grid functions carry nodal values on a uniform grid over (a, b) and are
extended by zero to the rest of the real line by convention.  Elements of
the discrete solution space vanish at the two Dirichlet nodes; data fields
(forcing, obstacle) may hold arbitrary nodal values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, GridMismatchError

CATALOG_IDS = ("CAT-A", "CAT-B", "CAT-C", "CAT-D")


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [a, b] with n_cells cells and zero Dirichlet nodes 0, n_cells."""

    a: float
    b: float
    n_cells: int
    h: float
    nodes: np.ndarray

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    def same_layout(self, other: "Grid") -> bool:
        return (
            self.n_cells == other.n_cells
            and self.a == other.a
            and self.b == other.b
        )


def build_grid(a: float, b: float, n_cells: int) -> Grid:
    """Build a uniform grid on (a, b) with at least 4 cells."""
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise ConfigurationError(f"domain endpoints must satisfy b > a, got a={a}, b={b}")
    n_cells = int(n_cells)
    if n_cells < 4:
        raise ConfigurationError(f"n_cells must be >= 4, got {n_cells}")
    h = (b - a) / n_cells
    nodes = a + h * np.arange(n_cells + 1, dtype=np.float64)
    nodes.flags.writeable = False
    return Grid(a=a, b=b, n_cells=n_cells, h=h, nodes=nodes)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a grid, implicitly extended by zero outside (a, b)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.shape != (self.grid.n_cells + 1,):
            raise GridMismatchError(
                f"expected {self.grid.n_cells + 1} nodal values, got shape {vals.shape}"
            )
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n_cells + 1))

    @classmethod
    def from_interior(cls, grid: Grid, interior: np.ndarray) -> "GridFunction":
        """Solution-space element: given interior values, boundary nodes are 0."""
        vals = np.zeros(grid.n_cells + 1)
        vals[1:-1] = interior
        return cls(grid, vals)

    @classmethod
    def from_callable(
        cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray], solution_space: bool = False
    ) -> "GridFunction":
        vals = np.asarray(fn(grid.nodes), dtype=np.float64) * np.ones(grid.n_cells + 1)
        if solution_space:
            vals = vals.copy()
            vals[0] = 0.0
            vals[-1] = 0.0
        return cls(grid, vals)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_solution_space(self) -> bool:
        return self.values[0] == 0.0 and self.values[-1] == 0.0


@dataclass(frozen=True)
class FractionalParams:
    """Differentiability order s, integrability p, and derived constants."""

    s: float
    p: float
    kappa_s: float
    C_1p: float
    p_star: float
    p_natural: float


def make_params(s: float, p: float) -> FractionalParams:
    """Parameters for order s in (0, 1] and exponent p in (1, inf).

    In one dimension the sphere S^0 is the two-point set {-1, +1}, so the
    normalisation integral equals 2 and C_1p = p / 2.  kappa_s vanishes
    linearly as s -> 1, which is what makes the limit operator local.
    """
    s = float(s)
    p = float(p)
    if not (0.0 < s <= 1.0):
        raise ConfigurationError(f"s must lie in (0, 1], got {s}")
    if not (1.0 < p < math.inf):
        raise ConfigurationError(f"p must lie in (1, inf), got {p}")
    C_1p = p / 2.0
    kappa_s = (1.0 - s) * C_1p / 2.0
    sp = s * p
    if sp < 1.0:
        p_star = p / (1.0 - sp)
    else:
        p_star = math.inf
    p_natural = 1.0 if math.isinf(p_star) else p_star / (p_star - 1.0)
    return FractionalParams(s=s, p=p, kappa_s=kappa_s, C_1p=C_1p, p_star=p_star, p_natural=p_natural)


def pos_neg_split(f: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Jordan decomposition f = f_plus - f_minus with f_plus * f_minus = 0 nodewise."""
    plus = np.maximum(f.values, 0.0)
    minus = np.maximum(-f.values, 0.0)
    return GridFunction(f.grid, plus), GridFunction(f.grid, minus)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Forcing, obstacle, and the nondegeneracy window of one benchmark problem.

    lam > 0 records the claim f <= -lam on the window omega; it is validated
    nodewise at construction for every grid resolution.
    """

    catalog_id: str
    f: GridFunction
    psi: GridFunction
    omega: tuple[float, float] | None = None
    lam: float = 0.0

    def __post_init__(self) -> None:
        grid = self.f.grid
        if not grid.same_layout(self.psi.grid):
            raise GridMismatchError("forcing and obstacle live on different grids")
        if self.psi.values[0] > 0.0 or self.psi.values[-1] > 0.0:
            raise ConfigurationError("obstacle must be <= 0 at the Dirichlet nodes")
        if self.omega is not None:
            lo, hi = self.omega
            if not (grid.a < lo < hi < grid.b):
                raise ConfigurationError(f"window {self.omega} is not strictly inside the domain")
        if self.lam > 0.0:
            if self.omega is None:
                raise ConfigurationError("lam > 0 requires a window omega")
            lo, hi = self.omega
            mask = (grid.nodes >= lo) & (grid.nodes <= hi)
            if np.any(self.f.values[mask] > -self.lam):
                raise ConfigurationError(
                    f"{self.catalog_id}: forcing exceeds -lam on the window omega"
                )

    @property
    def grid(self) -> Grid:
        return self.f.grid


def _cat_b_f(x: np.ndarray) -> np.ndarray:
    return 8.0 * (0.25 - x * x)


# Bump width 150: narrow enough that the obstacle binds on an interior
# interval around 0 at s = 1 (width 50 leaves the unconstrained solution
# positive everywhere and the coincidence set empty).
_CAT_C_WIDTH = 150.0


def _cat_c_f(x: np.ndarray) -> np.ndarray:
    w = _CAT_C_WIDTH
    return 10.0 * (np.exp(-w * (x + 0.5) ** 2) + np.exp(-w * (x - 0.5) ** 2)) - 2.0


def catalog_problem(catalog_id: str, grid: Grid) -> ProblemSpec:
    """Instantiate one of the fixed benchmark problems on the given grid.

    CAT-A  f = -1, zero obstacle: the solution is identically zero.
    CAT-B  f(x) = 8(1/4 - x^2) on (-1, 1): one positivity interval, two
           free-boundary points, f <= -1.38 on [0.65, 0.95].
    CAT-C  two Gaussian bumps minus a constant on (-1, 1): interior
           coincidence island around 0, f <= -1.5 on [-0.25, 0.25].
    CAT-D  f = -1 with the nonzero obstacle psi(x) = 0.1 - x^2.
    """
    if catalog_id not in CATALOG_IDS:
        raise ConfigurationError(
            f"unknown catalog id {catalog_id!r}; expected one of {', '.join(CATALOG_IDS)}"
        )
    zero = GridFunction.zeros(grid)
    if catalog_id == "CAT-A":
        f = GridFunction(grid, np.full(grid.n_cells + 1, -1.0))
        return ProblemSpec("CAT-A", f, zero)
    if catalog_id == "CAT-D":
        f = GridFunction(grid, np.full(grid.n_cells + 1, -1.0))
        psi = GridFunction(grid, 0.1 - grid.nodes**2)
        return ProblemSpec("CAT-D", f, psi)
    if not (grid.a == -1.0 and grid.b == 1.0):
        raise ConfigurationError(f"{catalog_id} is calibrated for the domain (-1, 1)")
    if catalog_id == "CAT-B":
        f = GridFunction(grid, _cat_b_f(grid.nodes))
        lam = 8.0 * (0.65**2 - 0.25)
        return ProblemSpec("CAT-B", f, zero, omega=(0.65, 0.95), lam=lam)
    f = GridFunction(grid, _cat_c_f(grid.nodes))
    return ProblemSpec("CAT-C", f, zero, omega=(-0.25, 0.25), lam=1.5)
