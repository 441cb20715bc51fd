class QueueSolverError(Exception):
    """Base class for every error raised by the solver, the simulator and the reports."""


class ModelValidationError(QueueSolverError):
    """A model document does not describe a valid queue; `path` names the offending element."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ReducibleChainError(QueueSolverError):
    pass


class DegenerateModelError(QueueSolverError):
    pass


class UnstableModelError(QueueSolverError):
    """Raised where rho < 1 is required but the model is at or above the stability boundary."""


class RootCountMismatch(QueueSolverError):
    pass


class NearUnitRoot(QueueSolverError):
    pass


class SingularBoundarySystem(QueueSolverError):
    pass


class NegativeBoundaryMass(QueueSolverError):
    pass


class EvalAtPole(QueueSolverError):
    pass


class InversionUnstable(QueueSolverError):
    pass


class TruncationFailure(QueueSolverError):
    pass


class NotN2(QueueSolverError):
    def __init__(self, n_types: int):
        self.n_types = n_types
        super().__init__(f"the two-type closed form needs N=2, model has N={n_types}")


class InvalidHTDenominator(QueueSolverError):
    pass


class UnstableRun(QueueSolverError):
    pass
