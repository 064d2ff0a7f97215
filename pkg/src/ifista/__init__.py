"""Inexact accelerated proximal-gradient solvers with certified error budgets
and a verification harness for their convergence-rate bounds."""

from .analysis import (
    DriftReport,
    RateFit,
    ScheduleVerdict,
    bihari_bound,
    bihari_extremal_sequence,
    cesaro_reconstruct,
    iterate_convergence_diagnostic,
    rate_fit,
    recurrence_bound,
    recurrence_envelope_bound,
    recurrence_extremal_sequence,
    schedule_feasibility,
    summable_drift_converges,
)
from .exceptions import ConfigError, DivergenceError, InnerSolverCapError, ReferenceError
from .inexact import (
    ErrorSchedule,
    ProxCertificate,
    StochasticOracleSpec,
    gradient_error,
    inexact_prox_dual,
    inexact_prox_perturb,
    inexact_prox_weak,
    stochastic_grad,
)
from .params import (
    AdmissibilityReport,
    ParamFamily,
    ParamSequence,
    beta,
    phi,
    validate_admissible,
)
from .problems import (
    CompositeProblem,
    NonsmoothPart,
    ReferenceSolution,
    SmoothOracle,
    ensure_reference,
    make_box_qp,
    make_lasso,
    make_quadratic,
    make_tv1d,
    reference_optimum,
    soft_threshold,
)
from .solvers import (
    DeterministicConfig,
    SolverTrace,
    StochasticAggregate,
    StochasticConfig,
    TRACE_COLUMNS,
    bound_series_from_trace,
    energy,
    run_baseline,
    run_inexact_fista,
    run_stochastic_fista,
    theorem_bound_deterministic,
    theorem_bound_stochastic,
)

__version__ = "0.1.0"
