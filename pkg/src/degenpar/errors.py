"""Exception types raised across the package."""


class DegenparError(Exception):
    """Base class for all package errors."""


class InvalidNonlinearity(DegenparError):
    pass


class AdmissibilityError(DegenparError):
    pass


class ParameterError(DegenparError):
    pass


class DegenerateInputError(DegenparError):
    pass


class ShapeError(DegenparError):
    pass


class WindowError(DegenparError):
    pass


class StepFailure(DegenparError):
    """Newton iteration did not reach tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PositivityError(StepFailure):
    pass


class ConditionViolation(DegenparError):
    """A hypothesis of the gradient estimate fails on the data."""

    def __init__(self, message, condition=None, details=None):
        super().__init__(message)
        self.condition = condition
        self.details = details or {}


class PinchViolation(ConditionViolation):
    pass
