"""Exception and warning types raised across the toolkit."""


class IsdecodeError(Exception):
    """Base class for every error raised by this package."""


class FormatError(IsdecodeError, ValueError):
    """A file does not follow the expected container layout."""


class DataError(IsdecodeError, ValueError):
    """Input values are unusable (non-finite, out of range, empty result)."""


class ParameterError(IsdecodeError, ValueError):
    """An argument violates the operation's preconditions."""


class StratificationError(ParameterError):
    """Labels cannot be split into the requested number of stratified folds."""


class NotPositiveDefiniteError(DataError):
    """A matrix that must be SPD has a non-positive eigenvalue."""


class TrainingError(IsdecodeError, ValueError):
    """The classifier cannot be trained on the supplied data."""


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped at its iteration cap."""
