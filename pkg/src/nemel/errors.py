"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or physically invalid parameters."""


class NumericalError(RuntimeError):
    """A numerical stage failed (non-convergence, positivity or length loss)."""


class SolverError(NumericalError):
    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(f"{msg} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class SnapshotError(ValueError):
    """Malformed, truncated or mismatched snapshot file."""
