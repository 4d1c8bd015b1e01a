"""Exception hierarchy shared by the gaitprint modules."""


class GaitprintError(Exception):
    """Base class for all library errors."""


class InvalidSeries(GaitprintError, ValueError):
    pass


class DegenerateSeries(GaitprintError, ValueError):
    """Series has zero variance and cannot be z-scored."""


class WindowTooLarge(GaitprintError, ValueError):
    pass


class SeriesTooShort(GaitprintError, ValueError):
    pass


class IncompleteComplex(GaitprintError):
    """Fewer than four alternating extrema follow a P point within the search bound."""

    def __init__(self, message, reason="incomplete"):
        super().__init__(message)
        self.reason = reason


class EmptyInput(GaitprintError, ValueError):
    pass


class ClassMissing(GaitprintError, ValueError):
    pass


class SingularCovariance(GaitprintError, ValueError):
    pass


class DimMismatch(GaitprintError, ValueError):
    pass


class NonFinite(GaitprintError, ArithmeticError):
    pass


class SingleClass(GaitprintError, ValueError):
    pass


class MissingSession(GaitprintError, ValueError):
    pass


class MissingRoot(GaitprintError, FileNotFoundError):
    pass


class EmptyRecording(GaitprintError, ValueError):
    pass


class NoSubjectsRemain(GaitprintError, ValueError):
    pass


class InvalidParams(GaitprintError, ValueError):
    pass
