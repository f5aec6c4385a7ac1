"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (CLI exit code 3)."""


class IntegrationError(NumericalError):
    """State became non-finite during integration."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class ConvergenceError(NumericalError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class NotAFixedPointError(NumericalError):
    def __init__(self, point, delta, eps0):
        self.point = point
        self.delta = delta
        super().__init__(f"drift delta={delta:.3g} >= eps0={eps0:.3g} at {point}")


class RankDeficiencyError(NumericalError):
    def __init__(self, message, directions=None):
        self.directions = directions
        super().__init__(message)


class ModelDivergenceError(NumericalError):
    """Closed-loop output left the admissible region."""

    def __init__(self, step, limit):
        self.step = step
        super().__init__(f"model output exceeded {limit:.3g} at step {step}")


class BundleError(ValueError):
    """Model bundle is unreadable: wrong version, bad checksum, truncated file."""
