"""Exception types shared across the package.

The CLI maps :class:`ValidationError` and :class:`UsageError` to exit code 2
and :class:`OverflowDomainError` to exit code 3.
"""


class KleinGrowthError(Exception):
    pass


class UsageError(KleinGrowthError, ValueError):
    """Caller passed arguments outside an operation's contract."""


class ValidationError(KleinGrowthError, ValueError):
    """Configuration or presentation failed validation."""


class InsufficientDataError(KleinGrowthError, ValueError):
    """A statistical estimator was asked to work without enough data."""


class BeardonBoundError(ValidationError):
    """Critical exponent at or below ``r_max / 2``."""

    def __init__(self, delta: float, r_max: int):
        self.delta = delta
        self.r_max = r_max
        super().__init__(
            f"delta={delta!r} violates Beardon's bound delta > r_max/2 = {r_max / 2!r}"
        )


class OverflowDomainError(KleinGrowthError, ArithmeticError):
    """Floating-point range exhausted (matrix growth, height underflow, integer cap)."""

    def __init__(self, message: str, word_length: int | None = None, word=None):
        self.word_length = word_length
        self.word = word
        if word_length is not None:
            message = f"{message} (word length {word_length})"
        if word is not None:
            message = f"{message}: {word}"
        super().__init__(message)
