"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An input broke a documented precondition (shape, symmetry, feasibility)."""


class ParameterError(ValueError):
    """A hyperparameter or configuration value is out of its valid range."""


class NumericalAbort(RuntimeError):
    """The optimization produced a non-finite quantity and was stopped."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
