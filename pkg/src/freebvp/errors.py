"""Exception hierarchy shared by the solvers."""


class SolverError(RuntimeError):
    """Base class for numerical failures (as opposed to bad input)."""


class IntegrationDiverged(SolverError):
    """The IVP state became non-finite; ``t`` is where it happened."""

    def __init__(self, t):
        super().__init__(f"integration diverged at t={t:.6g}")
        self.t = t


class StepLimitExceeded(SolverError):
    pass


class NewtonStagnation(SolverError):
    pass


class MaxIterationsExceeded(SolverError):
    pass


class FreeBoundaryCollapse(SolverError):
    """Newton kept driving x_eps to a non-positive value.

    Usually a bad initial guess or an eps with the wrong sign.
    """


class SingularSystem(SolverError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
