"""Exception hierarchy shared by all modules."""


class LvmcError(Exception):
    """Base class for package errors."""


class InvalidInputError(LvmcError, ValueError):
    pass


class DegenerateInputError(InvalidInputError):
    pass


class ConstraintViolationError(LvmcError, ValueError):
    pass


class TrainingDivergenceError(LvmcError, RuntimeError):
    pass


class ConvergenceError(LvmcError, RuntimeError):
    """Power flow failed to converge.

    ``bus`` names the bus with the largest remaining voltage update.
    """

    def __init__(self, message, bus=None, mismatch=None):
        super().__init__(message)
        self.bus = bus
        self.mismatch = mismatch


class InvalidTopologyError(InvalidInputError):
    pass


class UndefinedMeasureError(LvmcError, ValueError):
    pass
