"""Exception types raised across hofnet."""


class HofError(Exception):
    """Base class for all hofnet errors."""


class ShapeError(HofError, ValueError):
    pass


class NonFiniteError(HofError, FloatingPointError):
    pass


class EmptySetError(HofError, ValueError):
    pass


class BoundsError(HofError, ValueError):
    pass


class SpecError(HofError, ValueError):
    pass


class PreconditionError(HofError, ValueError):
    pass


class FormatError(HofError, ValueError):
    pass


class EndpointError(HofError, ValueError):
    pass


class UsageError(HofError):
    pass
