"""Exception types raised across the package."""


class AnisoDwrError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometryError(AnisoDwrError):
    """Degenerate ranges, inverted cells, or singular mapping Jacobians."""


class StaleMarkError(AnisoDwrError):
    """A refinement mark refers to a cell that is no longer active."""


class PreconditionError(AnisoDwrError):
    """An operation was called on data violating its preconditions."""


class PointNotFoundError(AnisoDwrError):
    """A physical point could not be located inside any active cell."""


class MappingError(AnisoDwrError):
    """Inverse-mapping Newton iteration failed to converge."""


class SingularSystemError(AnisoDwrError):
    """Sparse factorization or solve broke down."""

    def __init__(self, message, slab_index=None):
        super().__init__(message)
        self.slab_index = slab_index


class BracketingError(AnisoDwrError):
    """A root-finding threshold could not be bracketed."""


class ConfigError(AnisoDwrError):
    """Malformed or inconsistent run configuration."""
