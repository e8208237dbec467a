"""Exception hierarchy shared by all simulators."""


class SeedbankError(ValueError):
    """Base class for every error raised by this package."""


class InvalidMeasureError(SeedbankError):
    pass


class DegenerateGridError(SeedbankError):
    pass


class DimensionMismatchError(SeedbankError):
    pass


class NonPositiveStepError(SeedbankError):
    pass


class InvalidStateError(SeedbankError):
    pass


class BankTooSmallError(SeedbankError):
    """Raised when a seed-bank would hold fewer individuals than migrate per generation."""

    def __init__(self, message, dropped_mass=0.0):
        super().__init__(message)
        self.dropped_mass = dropped_mass


class NonIntegerMassError(SeedbankError):
    pass


class AbsorbingStateError(SeedbankError):
    pass


class StateSpaceTooLargeError(SeedbankError):
    pass


class FlagNotInModelError(SeedbankError):
    pass


class FlagMismatchError(SeedbankError):
    pass


class ZeroVarianceError(SeedbankError):
    pass
