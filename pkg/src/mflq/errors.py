"""Exception taxonomy shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps these onto exit codes (validation 2, numerical 3,
no-convergence 4).
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ToolkitError):
    """Malformed model, policy, config, or argument."""


class ParseError(ValidationError):
    """Unreadable or schema-violating config/policy file."""


class SizeMismatch(ValidationError):
    """Operands whose dimensions do not line up."""


class MissingPolicy(ValidationError):
    """An operation that needs feedback gains got a bare model."""


class NotAGridNode(ValidationError):
    """Requested time is not one of the stored grid nodes."""


class TooLarge(ValidationError):
    """Input exceeds a hard size cap (e.g. assignment problems)."""


class InsufficientData(ValidationError):
    """Not enough samples/steps to run the requested statistic."""


class NumericalError(ToolkitError):
    """Numerical failure: singularity, indefiniteness, blow-up."""


class NonFiniteState(NumericalError):
    """Integration produced NaN or Inf."""


class SingularMatrix(NumericalError):
    """Linear solve hit a (near-)zero pivot or failed its residual check."""


class SingularR(NumericalError):
    """Control weight R(t) or its aggregate failed PD factorization."""


class SingularAnchor(NumericalError):
    """Periodic anchor system (I - Psi_tau) is singular."""


class NotPositiveDefinite(NumericalError):
    """Cholesky pivot fell below threshold."""


class NotAdmissible(NumericalError):
    """Policy fails the mean/second-moment stability certificate."""


class ConvergenceError(ToolkitError):
    """Iteration failed to converge."""


class NoConvergence(ConvergenceError):
    """Iteration cap reached before the tolerance was met."""


class ResidualTooLarge(ConvergenceError):
    """Converged object does not satisfy its equation to tolerance."""


class PeriodicityViolation(ConvergenceError):
    """Solution fails to close up over one period."""
