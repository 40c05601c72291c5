"""Exception types shared across the package."""


class EdgevarError(Exception):
    """Base class for all package errors."""


class ConfigError(EdgevarError):
    """Invalid configuration, model definition or parameter gate."""


class ExpressionError(ConfigError):
    """Malformed coefficient expression."""


class SimulationDivergedError(EdgevarError):
    """State became non-finite during path simulation."""

    def __init__(self, fine_index, message=None):
        self.fine_index = fine_index
        super().__init__(message or f"simulation diverged at fine index {fine_index}")


class DomainExitError(EdgevarError):
    """A simulated path left the declared evaluation domain."""


class DegenerateDiffusionError(EdgevarError):
    """|b1| fell below its declared lower bound, or a variation process hit zero."""


class DegenerateVariationError(DegenerateDiffusionError):
    """First-variation process is zero where a division is required."""


class ContractViolation(EdgevarError):
    """An operation was called with inputs violating its precondition."""


class SingularityError(ContractViolation):
    """Evaluation would hit a non-integrable singularity (e.g. f'' at 0 for p < 2)."""


class NonpositiveVarianceError(EdgevarError):
    """A variance estimate required to be positive was <= 0."""


class BandwidthZeroError(EdgevarError):
    """Kernel bandwidth degenerated to zero (constant sample)."""


class FailureThresholdExceeded(EdgevarError):
    """Too many replications failed; the experiment aborts."""
