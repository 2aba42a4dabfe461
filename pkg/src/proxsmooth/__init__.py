"""Smoothing-based first-order methods for weakly convex minimization.

The package minimizes a weakly convex function by descending on its
high-order Moreau envelope, whose (inexact) gradients are obtained from
approximate high-order proximal points computed by an inner subgradient
solver.
"""

from proxsmooth.envelope import (
    AdmissibilityError,
    GridSpec,
    KappaTable,
    SmoothnessBounds,
    exact_envelope_oracle,
    kappa,
    kappa_table,
    safeguarded_bounds,
    smoothness_constants,
    solve_t_hat,
    tau_lower_bounded,
    tau_prox_bounded,
)
from proxsmooth.objectives import (
    SparseRecoveryInstance,
    WeaklyConvexFunction,
    clipped_quadratic,
    clipped_quadratic_subgrad,
    generate_instance,
    rsr_subgrad,
    rsr_value,
    sparse_recovery_objective,
)
from proxsmooth.prox import (
    InexactOracle,
    InnerSolverConfig,
    ProxCertificate,
    certify,
    inexact_oracle,
    sg_inner_solve,
)
from proxsmooth.descent import (
    Budget,
    RateReport,
    SolverAbort,
    SolverParams,
    check_direction_pair,
    direction_power,
    higda_run,
    higda_step_size,
    ideals_run,
    itsdeal_generic_run,
    make_clock,
    pf_higda_run,
    realized_rho_hat,
    residual_rate_report,
    sg_run,
)
from proxsmooth.trace import RunTrace, TraceRow

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "Budget",
    "GridSpec",
    "InexactOracle",
    "InnerSolverConfig",
    "KappaTable",
    "ProxCertificate",
    "RateReport",
    "RunTrace",
    "SmoothnessBounds",
    "SolverAbort",
    "SolverParams",
    "SparseRecoveryInstance",
    "TraceRow",
    "WeaklyConvexFunction",
    "certify",
    "check_direction_pair",
    "clipped_quadratic",
    "clipped_quadratic_subgrad",
    "direction_power",
    "exact_envelope_oracle",
    "generate_instance",
    "higda_run",
    "higda_step_size",
    "ideals_run",
    "inexact_oracle",
    "itsdeal_generic_run",
    "kappa",
    "kappa_table",
    "make_clock",
    "pf_higda_run",
    "realized_rho_hat",
    "residual_rate_report",
    "rsr_subgrad",
    "rsr_value",
    "safeguarded_bounds",
    "sg_inner_solve",
    "sg_run",
    "smoothness_constants",
    "solve_t_hat",
    "sparse_recovery_objective",
    "tau_lower_bounded",
    "tau_prox_bounded",
]
