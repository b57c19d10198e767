"""Exception hierarchy for disclib."""


class DiscError(Exception):
    """Base class for all library errors."""


class EntryOutOfRange(DiscError, ValueError):
    pass


class DuplicateEntry(DiscError, ValueError):
    pass


class IndexOutOfBounds(DiscError, IndexError):
    pass


class DimensionMismatch(DiscError, ValueError):
    pass


class RetryExhausted(DiscError, RuntimeError):
    """A rejection-sampling or retry loop ran out of attempts."""


# the coloring pipeline reports the same condition under its own name
RetriesExhausted = RetryExhausted


class AllZeroWeights(DiscError, ValueError):
    pass


class NegativeWeight(DiscError, ValueError):
    pass


class NegativeMultiplier(DiscError, ValueError):
    pass


class NormExceeded(DiscError, ValueError):
    pass


class InvalidEpsilon(DiscError, ValueError):
    pass


class NormViolation(DiscError, ValueError):
    pass


class WeightInvariantViolation(DiscError, ValueError):
    pass


class OracleFailureBudgetExceeded(DiscError, RuntimeError):
    pass


class NoFeasibleLevel(DiscError, RuntimeError):
    pass


class FeasibilityLost(DiscError, RuntimeError):
    pass


class WalkOverflow(DiscError, RuntimeError):
    pass


class ColoringFailure(DiscError, RuntimeError):
    """A checked random coloring did not meet its bound."""


class TooLarge(DiscError, ValueError):
    pass


class ParseError(DiscError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
