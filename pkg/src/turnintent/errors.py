"""Exception hierarchy. Each class maps onto one CLI exit code."""


class TurnIntentError(Exception):
    exit_code = 1


class ValidationError(TurnIntentError, ValueError):
    """Bad input file, bad configuration, or violated precondition."""

    exit_code = 2


class InsufficientDataError(TurnIntentError):
    """Too few trials survive epoching for the requested evaluation."""

    exit_code = 3


class NumericError(TurnIntentError, ArithmeticError):
    """A linear system or optimiser failed numerically."""

    exit_code = 4
