"""Exception hierarchy shared by all wlab modules."""


class WlabError(Exception):
    """Base class for all errors raised by wlab."""

    exit_code = 3


class DivisionByZeroAtPole(WlabError, ZeroDivisionError):
    pass


class SingularAmbientPoint(WlabError):
    pass


class DegenerateReparam(WlabError):
    pass


class DegenerateMetric(WlabError):
    pass


class ParseError(WlabError):
    def __init__(self, position, expected, source=""):
        self.position = position
        self.expected = expected
        self.source = source
        super().__init__(f"parse error at offset {position}: expected {expected}")


class PeriodObstruction(WlabError):
    exit_code = 4

    def __init__(self, message, period=None):
        super().__init__(message)
        self.period = period


class PathThroughPole(WlabError):
    exit_code = 4


class HitsCenter(WlabError):
    pass


class CenterOnSurface(WlabError):
    exit_code = 4


class TransitionTooCoarse(WlabError):
    exit_code = 4


class NotConformalOnRegion(WlabError):
    exit_code = 4


class ToleranceNotMet(WlabError):
    """Raised when adaptive refinement exhausts its depth budget.

    ``result`` carries the best available estimate so callers can still
    report it (flagged).
    """

    exit_code = 2

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoDecayDetected(WlabError):
    exit_code = 2
