"""Exception types shared across the package."""


class NatrError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(NatrError):
    """Malformed input: bad shapes, bad schema, bad configuration."""


class RankDeficientError(NatrError):
    """Unpenalized solve on a rank-deficient design; a ridge penalty fixes it."""


class DivergenceError(NatrError):
    """An iterative solver failed to make progress."""


class ConstructionError(NatrError):
    """A synthetic object violated its own structural contract."""
