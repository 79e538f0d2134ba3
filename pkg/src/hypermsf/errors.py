"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

__all__ = [
    "HypermsfError",
    "HypergraphParseError",
    "HypergraphValidationError",
    "LaplacianError",
    "SpectrumError",
    "SyncPrecludedError",
    "DynamicsDomainError",
    "IntegrationError",
    "LyapunovError",
]


class HypermsfError(Exception):
    """Base class for all library errors."""


class HypergraphParseError(HypermsfError, ValueError):
    """Input text is not valid hypergraph JSON."""


class HypergraphValidationError(HypermsfError, ValueError):
    """Hypergraph structure violates an invariant (range, emptiness, duplicates)."""


class LaplacianError(HypermsfError, ValueError):
    """The Laplacian cannot be assembled, e.g. a vertex has zero degree."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class SpectrumError(HypermsfError, ArithmeticError):
    """Eigen-decomposition failed an internal consistency check."""


class SyncPrecludedError(HypermsfError, ValueError):
    """The Laplacian has no neutral (zero) modes, so no synchronized manifold exists."""


class DynamicsDomainError(HypermsfError, ValueError):
    """A coupling function was evaluated outside its domain (e.g. geometric mean of a non-positive entry)."""


class IntegrationError(HypermsfError, ArithmeticError):
    """A trajectory became non-finite.

    ``vertex`` and ``time`` locate the first bad value; ``partial`` holds the
    trajectory recorded up to that point when available.
    """

    def __init__(self, message, vertex=None, time=None, partial=None):
        super().__init__(message)
        self.vertex = vertex
        self.time = time
        self.partial = partial


class LyapunovError(HypermsfError, ArithmeticError):
    """Benettin estimation could not produce a finite estimate."""
