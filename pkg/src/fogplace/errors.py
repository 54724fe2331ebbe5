"""Exception hierarchy shared by every stage of the pipeline."""


class FogPlaceError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FogPlaceError, ValueError):
    pass


class ConfigurationError(FogPlaceError, ValueError):
    pass


class FormatError(FogPlaceError, ValueError):
    pass


class DegenerateInputError(FogPlaceError, ValueError):
    pass


class UnknownEntityError(FogPlaceError, KeyError):
    """Raised when a node, region or slot id does not exist."""

    def __str__(self):  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ConvergenceError(FogPlaceError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TrainingError(FogPlaceError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class SolverSizeError(FogPlaceError, ValueError):
    pass


class InvariantViolation(FogPlaceError, AssertionError):
    """An internal consistency check failed; the output must not be trusted."""
