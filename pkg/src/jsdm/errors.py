"""Exception hierarchy shared by all jsdm modules."""


class JsdmError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(JsdmError, ValueError):
    """An argument is outside its admissible range."""


class InfeasibleBDError(JsdmError):
    """Block diagonalization cannot provide the requested number of dimensions."""


class SelectionInfeasibleError(JsdmError):
    """The selected users give a rank-deficient effective channel."""


class ConvergenceError(JsdmError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(JsdmError):
    """Configuration file problems; ``errors`` holds one entry per issue."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
