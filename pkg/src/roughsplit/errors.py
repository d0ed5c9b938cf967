"""Exception hierarchy shared by all submodules."""


class RoughSplitError(Exception):
    """Base class for every error raised by roughsplit."""


class DegenerateInputError(RoughSplitError, ValueError):
    pass


class DimensionMismatchError(RoughSplitError, ValueError):
    pass


class InvalidTimeChangeError(RoughSplitError, ValueError):
    pass


class DegenerateTimeChangeError(InvalidTimeChangeError):
    """Raised when a time change is constant and cannot be rescaled."""


class ConcatenationError(RoughSplitError, ValueError):
    pass


class UnsupportedRegularityError(RoughSplitError, ValueError):
    pass


class MeshError(RoughSplitError, ValueError):
    pass


class DivergenceError(RoughSplitError, ArithmeticError):
    """State blew up; ``step`` is the index of the offending step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResolutionError(RoughSplitError, ValueError):
    """CFL condition would need an unreasonable number of sub-steps."""


class TwoRouteMismatchError(RoughSplitError, AssertionError):
    pass


class NoOracleError(RoughSplitError, LookupError):
    pass


class UnknownPresetError(RoughSplitError, KeyError):
    pass
