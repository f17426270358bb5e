"""Exception hierarchy shared by all modules."""


class SeqGradError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SeqGradError, ValueError):
    """Invalid scheme, model or configuration parameters."""


class ConstructionError(SeqGradError):
    """A gradient code could not be built with the required spanning property."""


class InsufficientResultsError(SeqGradError):
    """Not enough task results to decode."""


class DecodeError(SeqGradError):
    """The decoding linear system was solved with an unacceptable residual."""


class FitError(SeqGradError, ValueError):
    """Degenerate data for the load/runtime slope fit."""


class AdjustmentError(SeqGradError, ValueError):
    """A load adjustment produced a non-positive delay."""


class SimulationInvariantError(SeqGradError):
    """A job missed its decode deadline although wait-outs were enforced."""
