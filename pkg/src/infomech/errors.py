"""Exception and warning types shared across the package."""


class InfomechError(Exception):
    """Base class for all package-specific errors."""


class CovarianceError(InfomechError):
    """Noise covariance is singular, indefinite, or otherwise unusable."""


class DimensionError(InfomechError, ValueError):
    """Operands have incompatible dimensions."""


class ResonanceError(InfomechError):
    """Undamped frequency-response evaluation at an exact resonance."""


class StagnationError(InfomechError):
    """Gauss-Newton line search made no progress before convergence."""


class ConfigError(InfomechError):
    """Invalid run configuration; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class FdStepWarning(UserWarning):
    """Finite-difference step produced differences at round-off level."""


class StagnationWarning(UserWarning):
    """Line search stopped making progress before the step-norm test."""


class AntiresonanceWarning(UserWarning):
    """Log-magnitude sensitivity discarded near an antiresonance zero."""
