"""
Exception types raised by stochlang.
"""

from typing import Optional


class StochlangError(Exception):
    """Root of every error raised by the library."""


class NormalizationError(StochlangError):
    """Total mass is zero, negative or not finite."""


class BudgetExceeded(StochlangError):
    """An exhaustive pass would enumerate more words than the configured budget."""


class EmptySampleError(StochlangError):
    """An empirical distribution holds no retained samples."""


class AlphabetError(StochlangError):
    """A symbol is outside the alphabet, or two alphabets do not match."""


class WordError(StochlangError):
    """A word is empty or otherwise not a member of the non-empty strings over the alphabet."""


class SingularSystemError(StochlangError):
    """The total-weight linear system has no unique solution."""


class WeightError(StochlangError):
    """A probability weight ended up outside its allowed range."""


class ExhaustedSourceError(StochlangError):
    """A replay sample source was asked for more words than it holds."""


class ParseError(StochlangError):
    """Malformed stochastic regular expression text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class FormatError(StochlangError):
    """Malformed CRA, DFA, mixture or replay file."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# Errors caused by bad user input rather than by the computation itself
INPUT_ERRORS = (ParseError, FormatError, AlphabetError, WordError)
