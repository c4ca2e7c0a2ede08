"""Exception types shared across the package."""


class CellLoadError(Exception):
    """Base class for all errors raised by cellload."""


class NotConverged(CellLoadError):
    """Fixed-point iteration did not settle (demand infeasible or divergent)."""

    def __init__(self, message, rho=None, iterations=0, residual=float("inf")):
        super().__init__(message)
        self.rho = rho
        self.iterations = iterations
        self.residual = residual


class SingularJacobian(CellLoadError):
    pass


class InfeasibleScenario(CellLoadError):
    """Rejection sampling could not find a supported rate vector."""

    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed


class EmptyModel(CellLoadError, ValueError):
    pass


class IncompatibleData(CellLoadError, ValueError):
    pass


class LpInfeasible(CellLoadError):
    pass


class LpUnbounded(CellLoadError):
    pass


class LengthMismatch(CellLoadError, ValueError):
    pass
