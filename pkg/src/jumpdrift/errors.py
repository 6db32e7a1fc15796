"""Exception types shared across the package."""


class JumpDriftError(Exception):
    """Base class for all package-specific errors."""


class ModelEvaluationError(JumpDriftError):
    """A coefficient function returned a non-finite value at a probed point."""


class InfiniteMomentError(JumpDriftError):
    """A required moment of the jump measure is divergent or non-finite."""


class AssumptionViolationError(JumpDriftError):
    """A configured model violates an assumption needed by the requested operation."""


class ExplosionError(JumpDriftError):
    """The simulated state left the finite range."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"simulated state became non-finite at t={time:g}")


class InstrumentationRequiredError(JumpDriftError):
    """The operation needs Brownian increments but the path was not instrumented."""


class MissingJumpLogError(JumpDriftError):
    """Exact-jump truncation requested on a path without a jump-event log."""


class KernelConstructionError(JumpDriftError):
    """A constructed kernel failed its moment verification."""

    def __init__(self, moment_index, residual, message=None):
        self.moment_index = moment_index
        self.residual = residual
        super().__init__(
            message
            or f"kernel moment {moment_index} verification failed (residual {residual:.3e})"
        )


class EmptyGridError(JumpDriftError):
    """The candidate bandwidth grid is empty; T is too small."""


class GridMismatchError(JumpDriftError):
    """Two estimator outputs live on different evaluation grids."""


class ConfigurationError(JumpDriftError):
    """A required configuration value is missing or inconsistent."""


class ExperimentError(JumpDriftError):
    """Too many replications failed inside a Monte Carlo experiment."""
