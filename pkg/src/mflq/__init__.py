"""Ergodic linear-quadratic control of periodic mean-field SDEs.

Synthesis (periodic Riccati solves, offset equation, optimal feedback and
long-run value) plus three independent verification routes: periodic
moment orbits, Monte Carlo time averages, and Wasserstein diagnostics of
the long-run law.
"""

from .affine import (
    OptimalityReport,
    PeriodicVectorSolution,
    Synthesis,
    ValueReport,
    ergodic_value,
    feedforward_offset,
    optimal_policy,
    optimality_residuals,
    solve_periodic_offset,
    synthesize,
)
from .curves import GridCurve, MatrixCurve, TableCurve, TrigPolynomial, constant_curve
from .errors import (
    ConvergenceError,
    InsufficientData,
    MissingPolicy,
    NoConvergence,
    NonFiniteState,
    NotAdmissible,
    NotAGridNode,
    NotPositiveDefinite,
    NumericalError,
    ParseError,
    PeriodicityViolation,
    ResidualTooLarge,
    SingularAnchor,
    SingularMatrix,
    SingularR,
    SizeMismatch,
    ToolkitError,
    TooLarge,
    ValidationError,
)
from .model import (
    CoefficientSample,
    CoercivityReport,
    ClosedLoopMatrices,
    FeedbackPolicy,
    PeriodicModel,
    check_cost_coercivity,
    closed_loop_matrices,
    eval_coefficients,
)
from .moments import (
    CostDecomposition,
    MomentState,
    PeriodicMomentOrbit,
    cost_decomposition,
    finite_horizon_average,
    measure_flow_check,
    moment_rhs,
    period_average_cost,
    periodic_moment_orbit,
    propagate_moments,
)
from .montecarlo import (
    EmpiricalMeasure,
    MeasureDiagnostics,
    PathEnsemble,
    SimulationConfig,
    TimeAverage,
    law_at,
    path_streams,
    periodic_measure_diagnostics,
    running_cost,
    simulate_ensemble,
    time_average_cost,
    wasserstein2,
)
from .presets import builtin_model, harmonic_benchmark, scalar_benchmark
from .riccati import (
    PeriodicMatrixSolution,
    mean_feedback_gain,
    mean_riccati_rhs,
    solve_mean_riccati,
    solve_state_riccati,
    state_feedback_gain,
    state_riccati_rhs,
)
from .stability import (
    StabilityCertificate,
    certify,
    mean_monodromy,
    second_moment_monodromy,
)

__version__ = "0.1.0"
