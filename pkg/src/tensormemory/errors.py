"""Exception types raised across the package."""


class DimensionError(ValueError):
    """A vector or tensor does not match the expected rank.

    ``mode`` is the 1-based mode index of the offending operand, or None
    when the mismatch is not tied to a single mode.
    """

    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class UnknownSymbolError(KeyError):
    pass


class PatternError(ValueError):
    """Malformed query pattern (wrong number of free slots, bad slot for model)."""


class SignedModeError(ValueError):
    """Operation needs a nonnegative model (sum-product property)."""


class VocabularyTooLargeError(ValueError):
    pass


class TrainingDivergedError(FloatingPointError):
    pass


class ParseError(ValueError):
    def __init__(self, message, lineno=None):
        super().__init__(message)
        self.lineno = lineno


class CheckpointError(ValueError):
    pass


class CheckpointVersionError(CheckpointError):
    pass
