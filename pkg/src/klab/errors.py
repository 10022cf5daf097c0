"""Exception hierarchy shared by the klab modules."""


class KlabError(Exception):
    """Base class for all klab errors."""


class DomainError(KlabError, ValueError):
    """A function was evaluated outside the domain where it is defined."""


class WindowError(KlabError, ValueError):
    """The requested solution family does not exist at these parameters.

    ``threshold`` names the a/m threshold that rejected the request.
    """

    def __init__(self, message: str, threshold: str | None = None):
        super().__init__(message)
        self.threshold = threshold


class SolverError(KlabError, RuntimeError):
    """A nonlinear or linear solve failed to converge."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SimulationError(KlabError, RuntimeError):
    """A time integration was aborted; ``last_good`` holds the last valid snapshot."""

    def __init__(self, message: str, last_good=None):
        super().__init__(message)
        self.last_good = last_good
