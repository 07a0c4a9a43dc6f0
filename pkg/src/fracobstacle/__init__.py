"""Numerical laboratory for the fractional p-Laplacian obstacle problem in 1D.

Solves the obstacle variational inequality and its bounded-penalization
approximation on uniform grids for 0 < s <= 1 and 1 < p < inf, extracts
coincidence sets and free boundaries, and runs the stability studies in
the fractional order and in the penalization parameter.
"""

from .errors import ConfigurationError, GridMismatchError
from .grid import (
    CATALOG_IDS,
    FractionalParams,
    Grid,
    GridFunction,
    ProblemSpec,
    build_grid,
    catalog_problem,
    make_params,
    pos_neg_split,
)
from .operator import (
    KernelWeights,
    LocalOperator,
    SeminormValue,
    apply_operator,
    assemble_weights,
    energy,
    gagliardo_seminorm,
    gradient_norm,
    local_energy,
    local_p_laplacian,
    make_local_operator,
    near_field_correction,
)
from .quadrature import (
    QUAD_CATALOG_IDS,
    continuum_seminorm_p,
    gradient_norm_p,
    lp_norm_p,
    seminorm_quadrature,
)
from .solvers import (
    PenaltyFn,
    SolveReport,
    complementarity_residual,
    penalized_residual,
    penalty_shift,
    solve_penalized,
    solve_semilinear,
    solve_vi,
)
from .freeboundary import (
    CoincidenceSet,
    FreeBoundary,
    GrowthReport,
    QuasiCharacteristic,
    coincidence_set,
    default_coincidence_tol,
    free_boundary,
    growth_check,
    growth_exponent_fit,
    hausdorff_distance,
    holder_seminorm,
    lebesgue_distance,
    lewy_stampacchia_residual,
    recover_quasi_characteristic,
)
from .harness import (
    BbmReport,
    MetricRow,
    RateFit,
    SweepReport,
    bbm_check,
    emit_report,
    fit_rate,
    run_eps_sweep,
    run_s_sweep,
    trend_ok,
)
from .config import RunConfig, load_config

__version__ = "0.1.0"
