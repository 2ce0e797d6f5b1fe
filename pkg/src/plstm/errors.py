"""Exception types raised across the package."""


class PlstmError(Exception):
    """Base class for all errors raised by plstm."""


class CycleError(PlstmError):
    """The graph contains a directed cycle."""


class PathExplosionError(PlstmError):
    """Path enumeration exceeded the configured cap."""


class StrategyMismatch(PlstmError):
    """A decomposition strategy was requested for an unsuitable graph."""


class DecompositionMismatch(PlstmError):
    """A decomposition does not belong to the graph it is used with."""


class ShapeError(PlstmError, ValueError):
    """Array shapes are inconsistent with the graph or with each other."""


class LengthError(PlstmError, ValueError):
    """Sequence or grid extent is not padded to the required power of two."""


class RangeError(PlstmError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class DegenerateColumn(PlstmError, ValueError):
    """A transition column is all zero where a critical normalization needs it."""


class RejectionLimit(PlstmError):
    """Rejection sampling did not find an admissible configuration."""


class DatasetError(PlstmError):
    """The dataset on disk is missing or malformed."""


class NonFiniteLoss(PlstmError, FloatingPointError):
    """The loss evaluated to NaN or infinity."""


class SizeError(PlstmError, ValueError):
    """A benchmark size is invalid for the requested form."""


class UnknownSuite(PlstmError, ValueError):
    """A verification suite name is not recognized."""
