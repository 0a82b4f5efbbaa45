"""Exception hierarchy shared by all modules."""


class ConfluenceError(Exception):
    """Base class; ``str(err)`` is the machine-readable payload."""


class PathTooCloseToSingularity(ConfluenceError):
    pass


class StepUnderflow(ConfluenceError):
    pass


class DegenerateRoots(ConfluenceError):
    pass


class LabelUndefined(ConfluenceError):
    pass


class NotGeneric(ConfluenceError):
    pass


class BasePointOnSingularLine(ConfluenceError):
    pass


class EigenvalueCollision(ConfluenceError):
    pass


class ResonantLeadingMatrix(ConfluenceError):
    pass


class MatchingRadiusTooLarge(ConfluenceError):
    pass


class CoverFailure(ConfluenceError):
    pass


class NonHyperbolic(ConfluenceError):
    pass


class WordNotReduced(ConfluenceError):
    pass


class SampleHitsExcludedSet(ConfluenceError):
    pass


class SampleNearRepeller(ConfluenceError):
    pass


class ParseError(ConfluenceError):
    def __init__(self, line, message=""):
        self.line = line
        self.message = message
        super().__init__(f"ParseError:{line}" + (f" {message}" if message else ""))


class ConfigError(ConfluenceError):
    pass
