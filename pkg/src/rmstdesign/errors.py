"""Exception hierarchy shared by every module."""


class RmstError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RmstError, ValueError):
    """Invalid or unusable input data (maps to CLI exit code 65)."""


class MissingColumn(DataError):
    pass


class NonNumericValue(DataError):
    pass


class NonPositiveTime(DataError):
    pass


class InvalidIndicator(DataError):
    pass


class EmptyDataset(DataError):
    pass


class EmptyInput(DataError):
    pass


class ArmAbsent(DataError):
    pass


class EmptyArm(DataError):
    pass


class TauBeyondSupport(DataError):
    """The survival estimate is undefined on part of [0, tau]."""


class SingularGram(DataError):
    """Covariate second-moment matrix is (numerically) singular."""

    def __init__(self, message, condition_number=float("inf"), offending=()):
        super().__init__(message)
        self.condition_number = condition_number
        self.offending = tuple(offending)


class DivergentIntegrand(DataError):
    pass


class NonSurvivalInput(DataError):
    pass


class NegativeVariance(RmstError, ValueError):
    """pi*(1-pi)*e2 is not below the unadjusted variance."""


class TargetUnreachable(RmstError):
    """No grid point reached the target power; the full curve is attached."""

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve
