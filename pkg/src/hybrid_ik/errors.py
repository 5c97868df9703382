"""Exception hierarchy shared by every module."""


class IKError(Exception):
    """Base class for all errors raised by hybrid_ik."""


class ParseError(IKError):
    pass


class ValidationError(IKError):
    pass


class DimensionMismatch(IKError, ValueError):
    pass


class InvalidConfig(IKError, ValueError):
    pass


class OutOfRegion(IKError, ValueError):
    pass


class RegionUnreachable(IKError):
    pass


class UnknownSolver(IKError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
