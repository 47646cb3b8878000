"""Exception and warning types raised across the package."""


class MvpbError(Exception):
    """Base class for every error raised by mvpb."""


class ShapeMismatch(MvpbError, ValueError):
    pass


class NotADistribution(MvpbError, ValueError):
    pass


class EmptySample(MvpbError, ValueError):
    pass


class AbsoluteContinuityViolation(MvpbError, ValueError):
    pass


class DomainError(MvpbError, ValueError):
    pass


class TooFewExamples(MvpbError, ValueError):
    pass


class RequestTooLarge(MvpbError, ValueError):
    pass


class InstanceTooLarge(MvpbError, ValueError):
    pass


class UnknownClass(MvpbError, ValueError):
    pass


class LabelDomainError(MvpbError, ValueError):
    pass


class LineCountMismatch(MvpbError, ValueError):
    pass


class ParseError(MvpbError, ValueError):
    def __init__(self, path, line, column, message):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")


class ModelVersionMismatch(MvpbError, ValueError):
    pass


class ConfigError(MvpbError, ValueError):
    pass


class DegenerateViewWarning(UserWarning):
    """A view had no non-constant feature on the pool-building sample."""
