"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration and parameter problems
exit with 2, numerical failures with 1.
"""


class OpenLZError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(OpenLZError, ValueError):
    """A physical or numerical parameter is outside its allowed range."""


class ContractViolationError(OpenLZError, ValueError):
    """An input broke a structural precondition (shape, Hermiticity, ...)."""


class ResourceLimitError(OpenLZError, RuntimeError):
    """A requested computation exceeds a configured size cap."""


class PropagationError(OpenLZError, RuntimeError):
    """Time propagation failed; carries the diagnostics report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureError(OpenLZError, RuntimeError):
    """Adaptive quadrature did not converge under refinement."""


class ConfigError(OpenLZError, ValueError):
    """A run configuration file or CLI override is malformed."""
