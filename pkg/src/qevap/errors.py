"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class QevapError(Exception):
    """Base class for all package errors."""


class ConfigError(QevapError, ValueError):
    """Invalid configuration or out-of-domain input.

    ``key`` names the offending configuration entry when one is known.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ConvergenceError(QevapError, RuntimeError):
    """A plateau, fit, quadrature or extrapolation did not converge."""


class PoleProximityError(ConvergenceError):
    """A quadrature node landed too close to a simple pole."""
