"""Exception hierarchy shared by every module in the package."""


class DcmmError(ValueError):
    """Base class for all errors raised by :mod:`dcmm`.

    ``step`` is filled in by the estimation pipeline so callers can tell which
    stage of the algorithm failed.
    """

    step: str | None = None


class OmegaOutOfRange(DcmmError):
    pass


class InvalidFraction(DcmmError):
    pass


class InvalidProfile(DcmmError):
    pass


class DegenerateDraw(DcmmError):
    pass


class SingularPG(DcmmError):
    pass


class EmptyGraph(DcmmError):
    pass


class ConvergenceFailure(DcmmError):
    pass


class VertexHuntingStarved(DcmmError):
    pass


class RankDeficient(DcmmError):
    pass


class IllConditionedSimplex(DcmmError):
    pass


class MissingPureNode(DcmmError):
    pass


class KTooLargeForExhaustive(DcmmError):
    pass


class PackingStarved(DcmmError):
    def __init__(self, message, code=None):
        super().__init__(message)
        self.code = code


class InvalidPerturbation(DcmmError):
    def __init__(self, message, max_violation=0.0):
        super().__init__(message)
        self.max_violation = max_violation


class InfeasibleConfiguration(DcmmError):
    pass


class ConfigError(DcmmError):
    pass
