"""Exception hierarchy shared by the numerical modules and the CLI."""


class SturmWaveError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(SturmWaveError, ValueError):
    """A numeric parameter is outside its admissible range."""


class EvaluationError(SturmWaveError):
    """A coefficient or data sample evaluated to a non-finite value."""

    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} at x={x!r}")
        self.x = x


class IntegrationError(SturmWaveError):
    """The adaptive ODE integrator could not advance (step size underflow)."""

    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} at x={x!r}")
        self.x = x


class SpectralError(SturmWaveError):
    """An eigenvalue could not be bracketed or a spectral precondition failed."""

    def __init__(self, message, n=None):
        super().__init__(message if n is None else f"mode n={n}: {message}")
        self.n = n


class UsageError(SturmWaveError, ValueError):
    """Inputs do not belong together (grid mismatch, wrong basis, ...)."""


class CapabilityError(SturmWaveError):
    """A requested quantity needs data or regularity that is not available."""


class ResolutionError(SturmWaveError):
    """A quadrature grid is too coarse for the requested truncation."""

    def __init__(self, message, n=None):
        super().__init__(message if n is None else f"mode n={n}: {message}")
        self.n = n


class OracleError(SturmWaveError):
    """The finite-difference reference solver failed."""


class FitError(SturmWaveError):
    """A moderateness or decay regression received unusable data."""


class ConfigError(SturmWaveError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
