"""Exception types raised by bifuse."""


class InputError(ValueError):
    """Malformed or inconsistent input (shapes, bounds, non-finite values)."""


class DegenerateWeightsError(InputError):
    """An axis has edges but every weight on it is zero."""


class NumericalDivergenceError(ArithmeticError):
    """A solver iterate became non-finite."""

    def __init__(self, message, source=None):
        super().__init__(message)
        self.source = source
