"""Exception types raised across the toolkit.

The CLI maps these onto exit codes: config errors -> 2, data errors -> 3,
capacity errors -> 4.
"""


class CES2Error(Exception):
    """Base class for every error raised by the toolkit."""

    #: pipeline stage that raised the error, set by the orchestrator
    stage = None


class ConfigError(CES2Error, ValueError):
    pass


class DataError(CES2Error, ValueError):
    """Invalid or inconsistent input data."""


class DataFormatError(DataError):
    """A dataset file could not be parsed."""


class GraphInvariantError(DataError):
    """A graph violates one of its structural invariants."""


class DegenerateInputError(DataError):
    """The input is well formed but the quantity is undefined on it."""


class UnlabeledNodeError(DegenerateInputError):
    pass


class DimensionMismatchError(DataError):
    pass


class CapacityError(CES2Error):
    """A dense operation was requested above the dense size limit."""


class CheckpointError(DataError):
    pass


class CheckpointCorruptError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass
