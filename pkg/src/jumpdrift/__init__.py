"""Simulation and nonparametric sup-norm drift estimation for ergodic
multidimensional jump diffusions, with fixed-bandwidth, jump-truncated, and
fully data-driven Nadaraya-Watson estimators plus a Monte Carlo harness for
rate and concentration experiments."""

from .errors import (
    AssumptionViolationError,
    ConfigurationError,
    EmptyGridError,
    ExperimentError,
    ExplosionError,
    GridMismatchError,
    InfiniteMomentError,
    InstrumentationRequiredError,
    JumpDriftError,
    KernelConstructionError,
    MissingJumpLogError,
    ModelEvaluationError,
)
from .kernels import (
    Bandwidth,
    KernelSpec,
    eval_convolved,
    eval_product,
    grid_HT,
    grid_scriptHT,
    kernel_moment,
    make_kernel,
)
from .rates import HolderParams, bias_oracle, phi, rate_exponent

__version__ = "0.1.0"
