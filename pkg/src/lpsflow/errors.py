"""Exception types shared across the package."""

__all__ = [
    "ConfigurationError",
    "GeometryError",
    "UsageError",
    "SolverError",
    "PicardError",
]


class ConfigurationError(ValueError):
    """Invalid configuration value, key, or combination."""


class GeometryError(ValueError):
    """Degenerate or inconsistent mesh geometry."""


class UsageError(ValueError):
    """Operands that do not belong together (mesh/space mismatch etc.)."""


class SolverError(RuntimeError):
    """Linear solver failure (singular or badly conditioned system)."""


class PicardError(RuntimeError):
    """Nonlinear iteration did not reach the residual tolerance."""

    def __init__(self, message, residual=None, iterations=None, time=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.time = time
