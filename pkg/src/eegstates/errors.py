"""Exception types raised across the workbench.

Every domain error derives from :class:`WorkbenchError` so callers (and the
CLI) can distinguish expected input/contract violations from genuine bugs.
"""


class WorkbenchError(ValueError):
    """Base class for all expected workbench errors."""


# -- raw records -------------------------------------------------------------
class RecordFormatError(WorkbenchError):
    """A record CSV violates the canonical on-disk format."""


class MissingChannelError(RecordFormatError):
    """The header lacks one or more of the seven required channel names."""


class RaggedChannelsError(RecordFormatError):
    """Channel columns have unequal lengths."""


class BadSampleRateError(RecordFormatError):
    """The metadata row declares a sample rate other than 128 Hz."""


class OutOfHorizonError(WorkbenchError):
    """A time point falls outside the 40-minute labeling horizon."""


class BadArgsError(WorkbenchError):
    """Arguments violate an operation's documented preconditions."""


class ManifestError(WorkbenchError):
    """A dataset manifest is malformed or inconsistent."""


# -- feature extraction ------------------------------------------------------
class SignalTooShortError(WorkbenchError):
    """The signal is shorter than one analysis window."""


class BadShapeError(WorkbenchError):
    """A matrix does not have the shape an operation requires."""


class NegativePowerError(WorkbenchError):
    """Power values must be non-negative before dB conversion."""


# -- splits -------------------------------------------------------------------
class EmptyAfterDropError(WorkbenchError):
    """A subject retains zero records after the habituation drop."""


class UnknownSubjectError(WorkbenchError):
    """The requested subject is not present in the dataset."""


class TooFewSubjectsError(WorkbenchError):
    """Not enough subjects for the requested split paradigm."""


class BadFractionError(WorkbenchError):
    """A train fraction must lie strictly between 0 and 1."""


# -- standardization ----------------------------------------------------------
class TooFewFramesError(WorkbenchError):
    """At least two frames are needed to fit a standardizer."""


class MixedRecordsError(WorkbenchError):
    """Per-record fitting received frames from more than one record."""


class EmptyTrainError(WorkbenchError):
    """The training index set is empty."""


class LengthMismatchError(WorkbenchError):
    """Vector lengths do not match the fitted parameter dimension."""


class IncompleteMetadataError(WorkbenchError):
    """A pipeline run lacks the fit-scope metadata the auditor needs."""


# -- models / training --------------------------------------------------------
class ShapeMismatchError(WorkbenchError):
    """Input dimensions are incompatible with the model."""


class MissingValidationError(WorkbenchError):
    """Neural-network training requires a non-empty validation set."""


class NotFittedError(WorkbenchError):
    """The model has not been fitted yet."""


class EmptyError(WorkbenchError):
    """An operation received an empty input it cannot handle."""
