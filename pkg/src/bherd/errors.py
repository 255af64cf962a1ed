"""Exception hierarchy shared across the package."""


class BherdError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(BherdError):
    """Vector or matrix shapes do not line up."""


class NumericError(BherdError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""


class ConfigError(BherdError):
    """Invalid experiment configuration value."""


class FormatError(BherdError):
    """Malformed input file (e.g. IDX magic/count mismatch)."""


class AggregationError(BherdError):
    """Server-side aggregation received inconsistent client outputs."""


class RoundError(BherdError):
    """Failure inside a training round, carrying (round, client, step) context."""

    def __init__(self, message, round_index=None, client=None, step=None):
        super().__init__(message)
        self.round_index = round_index
        self.client = client
        self.step = step


class InsufficientDataError(BherdError):
    """Not enough recorded rounds for a summary statistic."""
