"""Exception hierarchy shared across the package."""


class HRDDError(Exception):
    """Base class for all errors raised by :mod:`hrdd`."""


class ValidationError(HRDDError, ValueError):
    """Input data violates a structural invariant.

    ``group`` and ``row`` are 1-based positions of the first offending entry
    (``row`` is ``None`` for group-level problems).
    """

    def __init__(self, message, group=None, row=None):
        super().__init__(message)
        self.group = group
        self.row = row


class SharpDesignViolation(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class NonBinaryOutcome(ValidationError):
    pass


class DomainError(HRDDError, ValueError):
    """A distribution or kernel parameter is outside its domain."""


class NumericalError(HRDDError, ArithmeticError):
    """A conditional became numerically invalid (non-PD precision, bad rate)."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class InsufficientDraws(HRDDError, ValueError):
    pass


class DegenerateSupport(HRDDError, ValueError):
    """Not enough spread in the running variable to build a bandwidth."""


class RankDeficient(HRDDError, ArithmeticError):
    pass


class OneSidedData(HRDDError, ValueError):
    pass


class LengthMismatch(HRDDError, ValueError):
    pass


class ParseError(HRDDError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MissingColumn(ParseError):
    def __init__(self, column):
        super().__init__(f"missing required column {column!r}")
        self.column = column


class MixedOutcomeType(ParseError):
    pass
