"""Exception types raised across the package."""


class IvStreamError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(IvStreamError, ValueError):
    """An argument violates a documented precondition (shape, range, sign)."""


class NumericalError(IvStreamError, ArithmeticError):
    """A linear solve or factorization failed.

    ``diagnostics`` carries whatever was measured at the point of failure
    (eigenvalue range, condition number, step index) so the caller can report it.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in self.diagnostics.items())
        return f"{base} ({details})"


class InsufficientDataError(IvStreamError, ValueError):
    """Too few observations for the requested statistic."""


class DegenerateVarianceError(IvStreamError, ValueError):
    """The outcome has zero total variance, so R^2 is undefined."""


class ConfigError(IvStreamError, ValueError):
    """Configuration validation failed; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(IvStreamError, ValueError):
    """A data file could not be parsed. Message names the row and column."""
