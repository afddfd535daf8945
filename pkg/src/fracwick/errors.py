"""Exception types shared across the package."""


class FracwickError(Exception):
    """Base class for all package-specific errors."""


class DiagonalSingularityError(FracwickError):
    """The kernel phi(s, t) was evaluated on its singular diagonal s = t."""


class GridMismatchError(FracwickError):
    """Two step functions (or a function and a basis) live on different grids."""


class DegenerateFamilyError(FracwickError):
    """A seed family lost rank during orthonormalization."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"seed family is rank deficient at index {index}")


class IllConditionedFrameError(FracwickError):
    """Covariance factorization failed at the largest jitter rung."""


class ComplexityGuardError(FracwickError):
    """A coupled-drift solve would exceed the configured memo budget."""


class DriftAuditError(FracwickError):
    """A drift evaluation violated its declared bound."""


class UnsupportedOperationError(FracwickError):
    """The requested operation needs structure the inputs do not declare."""


class EstimatorUndersampledError(FracwickError):
    """Too few samples per bin for the conditional-expectation estimator."""


class ConfigError(FracwickError):
    """An experiment configuration failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
