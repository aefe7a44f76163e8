"""Exception hierarchy shared by all modules."""


class PitmanLabError(Exception):
    """Base class for errors raised by pitmanlab."""


class CapabilityError(PitmanLabError):
    """The distribution does not support the requested operation."""


class OrderError(PitmanLabError):
    """A moment order is negative or beyond what is available."""


class DomainError(PitmanLabError):
    """An argument lies outside the domain of the operation."""


class DegenerateError(PitmanLabError):
    """The posterior support is empty; the sample is inconsistent with the model."""


class SizeError(PitmanLabError):
    """An exhaustive enumeration would exceed its size guard."""


class ShapeError(PitmanLabError):
    """Array shapes or index sets do not match."""


class SingularityError(PitmanLabError):
    """A covariance matrix is numerically singular."""


class ConfigError(PitmanLabError):
    """An experiment configuration is invalid.

    ``pointer`` is the JSON pointer of the offending value.
    """

    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer
