"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(ValueError):
    """A physical or protocol configuration is invalid."""


class FitError(RuntimeError):
    """A spectral or decay fit failed or was ill-posed.

    Attributes
    ----------
    diagnostics : dict
        Free-form details (initial guesses, window, optimizer message).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
