"""Exception types shared across the package."""


class AdvTextError(Exception):
    """Base class for all package errors."""


class EmptyTextError(AdvTextError):
    """Raised when a text to tokenize is empty or whitespace-only."""


class ParseError(AdvTextError):
    """Raised on malformed dataset / embedding / lexicon input.

    Carries the 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelOutOfRangeError(AdvTextError):
    """Raised when an example's label does not index the declared classes."""


class ZeroVectorError(AdvTextError):
    """Raised when cosine similarity is requested for a zero vector."""


class NoKnownWordsError(AdvTextError):
    """Raised when a text has no in-vocabulary token to encode."""


class BudgetExceededError(AdvTextError):
    """Raised when a model query would exceed the attack's query budget."""


class EmptyDatasetError(AdvTextError):
    """Raised when an operation needs at least one example and got none."""


class EmptyResultsError(AdvTextError):
    """Raised when a metric is computed over zero attack results."""


class DegenerateDesignError(AdvTextError):
    """Raised when the surrogate-fit design matrix has no variation."""


class ConfigError(AdvTextError):
    """Raised on invalid configuration values or missing required paths."""
