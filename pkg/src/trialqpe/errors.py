"""Exception hierarchy shared by all modules."""


class TrialQPEError(Exception):
    """Base class for every error raised by this package."""


class RejectedInputError(TrialQPEError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(TrialQPEError, MemoryError):
    """The requested instance exceeds a size cap."""


class BoundViolationError(TrialQPEError, ValueError):
    """A sampled potential value lies outside ``[0, M]``."""


class InvalidScalingError(TrialQPEError, ValueError):
    """Some eigenphase falls outside ``[0, 1)``; ``R`` is too small."""


class EmptyTrialSetError(TrialQPEError, ValueError):
    pass


class ExhaustionError(TrialQPEError):
    """No recorded outcome qualifies for selection."""


class PartialResultError(TrialQPEError):
    """A multi-level run stopped early; ``levels`` holds what was found."""

    def __init__(self, message, levels=(), outcomes=(), records=()):
        super().__init__(message)
        self.levels = list(levels)
        self.outcomes = list(outcomes)
        self.records = list(records)


class ConfigError(TrialQPEError, ValueError):
    pass
