"""Exception hierarchy shared by all modules."""


class EpicostError(Exception):
    """Base class for every error raised by this package."""


class InstabilityError(EpicostError):
    """The system matrix M = (1 - delta) I + beta A is not stable."""

    def __init__(self, lambda_max: float, message: str | None = None):
        self.lambda_max = lambda_max
        super().__init__(message or f"unstable system: lambda_max(M) = {lambda_max:.12g} >= 1")


class ConvergenceError(EpicostError):
    """An iterative method stopped before meeting its tolerance."""

    def __init__(self, message: str, best_estimate=None, residual: float | None = None):
        self.best_estimate = best_estimate
        self.residual = residual
        super().__init__(message)


class QuadratureError(ConvergenceError):
    pass


class FixedPointError(ConvergenceError):
    pass


class InapplicableError(EpicostError):
    """The asymptotic formula has no meaningful value at these parameters."""


class AssumptionViolatedError(InapplicableError):
    """A modelling assumption (e.g. finite variance) does not hold."""


class DenseCapError(EpicostError):
    pass


class DegenerateRegimeError(EpicostError):
    pass


class EdgeListParseError(EpicostError):
    def __init__(self, path, lineno: int, line: str):
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: cannot parse edge {line.strip()!r}")
