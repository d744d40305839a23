"""Exception hierarchy shared by all modules."""


class CarlemanError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CarlemanError, ValueError):
    pass


class StepSizeUnderflow(CarlemanError, RuntimeError):
    """Adaptive step collapsed; usually stiffness or a blow-up.

    ``t`` is the time reached and ``trajectory`` the samples produced so far.
    """

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class NotUpperTriangular(CarlemanError, ValueError):
    pass


class InsufficientCoefficients(CarlemanError, ValueError):
    pass


class OutOfTimeRange(CarlemanError, ValueError):
    pass


class InvalidBound(CarlemanError, ValueError):
    pass


class NegativeFrequencyPresent(CarlemanError, ValueError):
    pass


class InitialOutOfStrip(CarlemanError, ValueError):
    pass


class BranchJump(CarlemanError, RuntimeError):
    pass


class GateFailed(CarlemanError, ValueError):
    pass


class AssumptionViolated(CarlemanError, ValueError):
    """Raised with ``clause`` naming the failed hypothesis."""

    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class BlowUpReached(CarlemanError, RuntimeError):
    def __init__(self, message, t0=None):
        super().__init__(message)
        self.t0 = t0


class Unclassified(CarlemanError, ValueError):
    pass


class UnknownFigureId(CarlemanError, KeyError):
    pass
