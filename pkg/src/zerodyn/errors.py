"""Exception hierarchy shared by every module."""


class ZeroDynError(Exception):
    """Base class for all toolkit errors."""


class SingularMass(ZeroDynError):
    """The system matrix is numerically singular at the requested state."""


class SingularBlock(ZeroDynError):
    """A diagonal block or Schur complement of the system matrix is singular."""


class AsymmetricMatrix(ZeroDynError):
    pass


class SingularDecoupling(ZeroDynError):
    """The output block of the input matrix cannot be inverted."""


class RankDeficientInputs(ZeroDynError):
    pass


class NoRelativeDegree(ZeroDynError):
    pass


class InvalidParams(ZeroDynError):
    pass


class DimensionMismatch(ZeroDynError):
    pass


class EvaluationFailure(ZeroDynError):
    """A user-supplied field raised or returned non-finite values."""


class IntegrationFailure(ZeroDynError):
    """A simulation aborted; ``time`` records when."""

    def __init__(self, message, time):
        super().__init__(f"{message} (t = {time:.17g})")
        self.time = time
