"""Exception types shared across the package."""


class TubenavError(Exception):
    """Base class for all package errors."""


class InvalidStateError(TubenavError, ValueError):
    """A state, control, or belief contains non-finite or out-of-contract values."""


class ConsistencyError(TubenavError, ValueError):
    """A matrix violates a symmetry/PSD requirement beyond tolerance."""


class ConfigError(TubenavError, ValueError):
    """A configuration value or key is invalid."""


class ContractViolation(TubenavError, ValueError):
    """Caller broke an input contract (mismatched shapes, bad weight sums, ...)."""


class AllRolloutsRejected(TubenavError):
    """Every sampled rollout violated the hard risk threshold; fallback required."""
