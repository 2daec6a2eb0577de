"""Exception hierarchy shared across the package."""


class FasError(Exception):
    """Base class for every error raised by fasbar."""


class InvalidGeometryError(FasError, ValueError):
    pass


class ScheduleMismatchError(FasError, ValueError):
    """Port indices or pilot lengths do not fit the channel/schedule."""


class CapacityError(FasError, ValueError):
    """More measurements requested than there are ports."""


class ExhaustedScheduleError(FasError, RuntimeError):
    """Every port has already been measured."""


class InsufficientDataError(FasError, ValueError):
    pass


class InvariantViolationError(FasError, ValueError):
    pass


class NumericalFailureError(FasError, ArithmeticError):
    """A linear system could not be solved reliably.

    ``condition_number`` holds the 2-norm condition estimate of the
    offending matrix (``inf`` when it is exactly singular).
    """

    def __init__(self, message, condition_number=float("nan")):
        super().__init__(f"{message} (condition number ~ {condition_number:.3g})")
        self.condition_number = condition_number


class ConfigError(FasError, ValueError):
    """Invalid experiment configuration; ``field`` is the dotted path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
