"""Exception types raised across the package."""


class WeylCompError(Exception):
    """Base class for all package errors."""


class NonSquare(WeylCompError, ValueError):
    pass


class NonHermitian(WeylCompError, ValueError):
    pass


class NonFinite(WeylCompError, ValueError):
    pass


class DimensionMismatch(WeylCompError, ValueError):
    pass


class ParamOutOfRange(WeylCompError, ValueError):
    pass


class InvalidProbability(WeylCompError, ValueError):
    pass


class NotPositiveType(WeylCompError, ValueError):
    """Raised when a characteristic function has no probability vector behind it."""


class InvalidKernel(WeylCompError, ValueError):
    pass


class NonMember(WeylCompError, ValueError):
    """Raised when a joint function fails the twisted positivity test."""


class WrongDimension(WeylCompError, ValueError):
    pass


class SizeCap(WeylCompError, ValueError):
    pass


class SingularB(WeylCompError, ValueError):
    pass


class InvalidJoint(WeylCompError, ValueError):
    pass
