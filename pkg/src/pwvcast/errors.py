"""Exception hierarchy shared by every module in the package."""


class PwvcastError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PwvcastError, ValueError):
    """An input value lies outside the documented domain of an operation."""


class ConfigError(PwvcastError, ValueError):
    """An invalid configuration value or combination of settings."""


class ShapeError(PwvcastError, ValueError):
    """Array arguments with inconsistent or unexpected shapes."""


class ParseError(PwvcastError, ValueError):
    """Malformed input data: bad row, bad timestamp, bad number."""


class AlignmentError(ParseError):
    """A timestamp that does not fall on the fixed cadence grid."""


class FormatError(PwvcastError, ValueError):
    """A model file that is corrupt, truncated, or of an unknown version."""


class NumericError(PwvcastError, ArithmeticError):
    """A non-finite value appeared where finite arithmetic was required."""


class CacheError(PwvcastError, RuntimeError):
    """A backprop cache used with a model it was not produced by."""
