"""Exception types raised by the solvers, samplers and analysis routines."""


class MFGError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MFGError, ValueError):
    """An argument violates a documented precondition."""


class OutOfRegimeError(MFGError):
    """The closed-form stationary solution does not apply (clamped rates)."""


class IterationLimitError(MFGError):
    """An iterative solver exhausted its budget before reaching tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepSizeError(MFGError):
    """An ODE step produced negative mass; retry with a smaller step."""


class DomainError(MFGError, ValueError):
    """A point or perturbation falls outside the probability simplex."""


class DivergenceError(MFGError):
    """Training produced a non-finite loss."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class InfeasiblePathError(MFGError, ValueError):
    """A controlled path uses a rate matrix outside the admissible set."""
