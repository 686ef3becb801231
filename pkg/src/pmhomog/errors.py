"""Exception hierarchy shared by the library and the command line."""


class PMHError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(PMHError, ValueError):
    """Invalid parameters, ranges, resolution policy or config keys."""

    exit_code = 2


class NumericalError(PMHError, ArithmeticError):
    """A numerical routine failed (non-convergence, broken invariant)."""

    exit_code = 3


class SolverError(NumericalError):
    """Newton iteration did not converge, even with damping."""

    def __init__(self, message, residual=float("nan"), t=float("nan")):
        super().__init__(message)
        self.residual = residual
        self.t = t


class ExperimentError(NumericalError):
    """Too many failed tasks in a sweep."""


class PropertyCheckFailure(PMHError):
    """A diagnostic check (e.g. the defect bound) reported FAIL."""

    exit_code = 4
