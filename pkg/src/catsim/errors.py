"""Exception types shared across the toolkit."""


class CatsimError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(CatsimError):
    """Operands live on different or invalid truncated spaces."""


class TruncationError(CatsimError):
    """A state or operator is not representable at the requested truncation."""


class NumericalError(CatsimError):
    """An integrator or solver failed to reach its accuracy target."""


class DegenerateGapError(CatsimError):
    """The spectral gap is not separated from the steady space."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster if cluster is not None else []


class ConfigError(CatsimError):
    """A job configuration is malformed or violates the schema."""
