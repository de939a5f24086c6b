"""Exception hierarchy shared by all modules."""


class EnclosureError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(EnclosureError, ValueError):
    """Invalid parameters or run configuration."""


class UnsupportedGeometryError(EnclosureError, NotImplementedError):
    """A geometric functional or solver is not available for this shape pair."""


class NormalizationError(EnclosureError, ValueError):
    """A direction vector was expected to have unit length."""


class DomainError(EnclosureError, ValueError):
    """A parameter lies outside the admissible range (e.g. tau <= 0)."""


class SolverFailure(EnclosureError, RuntimeError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalFailure(EnclosureError, RuntimeError):
    """A dense system is too ill-conditioned to be trusted."""


class InsufficientDataError(EnclosureError, ValueError):
    """Too few usable indicator samples for an extraction."""


class SignInconsistencyError(EnclosureError, ValueError):
    """The indicator changes sign inside the sweep used for extraction."""
